"""Analog beam codebook and the exhaustive-search labeling oracle.

The mmWave stations steer with a DFT codebook of M unit-norm beams. The
figure of merit for a (channel, beam) pair is the achievable rate summed
over the synthesized subcarriers,

    rate = sum_k log2(1 + snr_scale * |h[k]^T v|^2)

where the product is a plain transpose (no conjugation) and snr_scale
collects transmit power over noise per subcarrier. The oracle label for
a user is the (station, beam) pair maximizing this rate over all mmWave
stations and all beams, with deterministic tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Codebook:
    """DFT beam codebook: ``beams[m]`` is the m-th unit-norm weight vector."""

    beams: np.ndarray                # (n_beams, n_elements) complex128
    spatial_frequencies: np.ndarray  # (n_beams,) float64

    @property
    def n_beams(self) -> int:
        return self.beams.shape[0]

    @property
    def n_elements(self) -> int:
        return self.beams.shape[1]


@dataclass(frozen=True)
class OracleLabel:
    """Exhaustive-search result for one user."""

    bs_index: int
    beam_index: int
    rate: float
    rate_vector: np.ndarray  # (n_beams,) rates at the selected station
    coverage: bool           # False when every mmWave link is blocked


def dft_codebook(n_elements: int, n_beams: int) -> Codebook:
    """Codebook with beam m = exp(j*pi*n*w_m)/sqrt(N), w_m = -1 + (2m+1)/M.

    The spatial frequencies w_m tile [-1, 1) symmetrically, so the beams
    are pairwise distinct and each has unit L2 norm. With M == N the
    beams are mutually orthogonal.
    """
    if n_elements < 1 or n_beams < 1:
        raise ConfigurationError("codebook needs n_elements >= 1 and n_beams >= 1")
    m = np.arange(n_beams)
    freqs = -1.0 + (2.0 * m + 1.0) / n_beams
    n = np.arange(n_elements)
    beams = np.exp(1j * np.pi * np.outer(freqs, n)) / np.sqrt(n_elements)
    return Codebook(beams=beams, spatial_frequencies=freqs)


def beam_rate(channel: np.ndarray, beam: np.ndarray, snr_scale: float) -> float:
    """Rate of one beam against per-subcarrier channel vectors (K, N)."""
    channel = np.asarray(channel)
    beam = np.asarray(beam)
    if channel.ndim != 2 or beam.ndim != 1 or channel.shape[1] != beam.shape[0]:
        raise ValueError(
            f"shape mismatch: channel {channel.shape} vs beam {beam.shape}"
        )
    if snr_scale < 0:
        raise ValueError("snr_scale must be non-negative")
    z = channel @ beam
    return float(np.sum(np.log2(1.0 + snr_scale * np.abs(z) ** 2)))


def rate_vector(channel: np.ndarray, codebook: Codebook, snr_scale: float) -> np.ndarray:
    """Rates of every codebook beam for one station/user link, shape (M,)."""
    channel = np.asarray(channel)
    if channel.ndim != 2 or channel.shape[1] != codebook.n_elements:
        raise ValueError(
            f"shape mismatch: channel {channel.shape} vs codebook "
            f"({codebook.n_beams}, {codebook.n_elements})"
        )
    if snr_scale < 0:
        raise ValueError("snr_scale must be non-negative")
    z = channel @ codebook.beams.T  # (K, M)
    return np.sum(np.log2(1.0 + snr_scale * np.abs(z) ** 2), axis=0)


def exhaustive_search(channels, codebook: Codebook, snr_scale: float) -> OracleLabel:
    """Best (station, beam) pair for one user by measuring every rate.

    ``channels`` holds one (K, N) channel array per mmWave station, in
    station-id order. Ties resolve to the lowest station id, then the
    lowest beam index. When no pair achieves a positive rate (every link
    blocked, or the user sits in a null of every beam) the label carries
    ``coverage=False`` and zero rate.
    """
    channels = [np.asarray(c) for c in channels]
    if not channels:
        raise ValueError("exhaustive search needs at least one station")
    rates = np.stack([rate_vector(c, codebook, snr_scale) for c in channels])
    if not np.any(rates > 0):
        return OracleLabel(0, 0, 0.0, rates[0], False)
    # argmax over the flattened row-major matrix: first occurrence wins,
    # which is exactly lowest station id then lowest beam index.
    flat = int(np.argmax(rates))
    bs_index, beam_index = divmod(flat, codebook.n_beams)
    return OracleLabel(bs_index, beam_index, float(rates[bs_index, beam_index]),
                       rates[bs_index], True)


def top_b_indices(rates: np.ndarray, b: int) -> np.ndarray:
    """Indices of the ``b`` largest entries, best first, ties by lower index."""
    rates = np.asarray(rates)
    if rates.ndim != 1:
        raise ValueError("rates must be a 1-d vector")
    if not 1 <= b <= rates.shape[0]:
        raise ValueError(f"b={b} outside 1..{rates.shape[0]}")
    order = np.argsort(-rates, kind="stable")
    return order[:b]


def calibrate_snr_scale(best_gains, n_elements: int, n_subcarriers: int,
                        target_snr_db: float = 10.0) -> float:
    """Choose snr_scale so the median user sits at the target SNR.

    ``best_gains`` holds, per user with coverage, the largest unblocked
    path gain among its mmWave links. At the matched beam the
    per-subcarrier SNR is snr_scale * gain * N / K, so the scale is set
    to put the median of these gains at ``target_snr_db``.
    """
    gains = np.asarray(list(best_gains), dtype=float)
    if gains.size == 0:
        raise ConfigurationError(
            "cannot calibrate snr_scale: no user has an unblocked mmWave link"
        )
    med = float(np.median(gains))
    if med <= 0:
        raise ConfigurationError("cannot calibrate snr_scale: median gain is zero")
    return 10.0 ** (target_snr_db / 10.0) * n_subcarriers / (med * n_elements)
