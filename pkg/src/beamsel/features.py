"""Sub-6GHz channel features and their normalization.

The model never sees user coordinates: its input is one row of five
path-derived quantities per sub-6GHz station, assembled in ascending
station-id order. Normalization statistics are fit on the training
split only and applied min-max per feature column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import BandConfig, PathParams, POWER_FLOOR_DB
from .errors import DataFormatError

# Fixed column order of the per-station feature row. Changing this is a
# dataset format change (bump the dataset version).
FEATURE_COLUMNS = ("azimuth", "elevation", "power_db", "phase", "delay")
N_FEATURES = len(FEATURE_COLUMNS)


@dataclass
class Sample:
    """One labeled example: features, oracle labels, and diagnostics.

    ``position`` is carried for analysis and plotting only; it is never
    part of the model input.
    """

    user_id: int
    features: np.ndarray   # (n_sub6_bs, N_FEATURES)
    bs_label: int          # oracle mmWave station id
    target: np.ndarray     # (n_beams,) normalized rate vector, max entry 1
    position: tuple[float, float, float]

    @property
    def beam_label(self) -> int:
        """Oracle beam: argmax of the target, ties to the lower index."""
        return int(np.argmax(self.target))


def extract_features(path: PathParams, band: BandConfig) -> np.ndarray:
    """Feature row for one sub-6GHz link, in FEATURE_COLUMNS order.

    Receive power is tx_power * gain in dB, floored at POWER_FLOOR_DB.
    """
    p = band.tx_power * path.gain
    power_db = 10.0 * math.log10(p) if p > 0 else POWER_FLOOR_DB
    power_db = max(power_db, POWER_FLOOR_DB)
    return np.array([path.azimuth, path.elevation, power_db,
                     path.phase, path.delay], dtype=float)


def assemble_input(rows, n_sub6_bs: int | None = None) -> np.ndarray:
    """Stack per-station feature rows into the model input matrix.

    ``rows`` must be ordered by station id. Raises ``ValueError`` when a
    row is malformed or the station count disagrees with ``n_sub6_bs``.
    """
    rows = [np.asarray(r, dtype=float) for r in rows]
    if not rows:
        raise ValueError("assemble_input needs at least one feature row")
    for i, r in enumerate(rows):
        if r.shape != (N_FEATURES,):
            raise ValueError(f"feature row {i} has shape {r.shape}, "
                             f"expected ({N_FEATURES},)")
    if n_sub6_bs is not None and len(rows) != n_sub6_bs:
        raise ValueError(f"expected {n_sub6_bs} feature rows, got {len(rows)}")
    return np.stack(rows)


@dataclass(frozen=True)
class NormStats:
    """Per-column min-max statistics, fit on the training split."""

    col_min: np.ndarray  # (N_FEATURES,)
    col_max: np.ndarray  # (N_FEATURES,)
    scheme: str = "minmax"

    def to_dict(self) -> dict:
        return {"scheme": self.scheme,
                "col_min": [float(v) for v in self.col_min],
                "col_max": [float(v) for v in self.col_max]}

    @staticmethod
    def from_dict(d: dict) -> "NormStats":
        if d.get("scheme") != "minmax":
            raise DataFormatError(f"unknown normalization scheme {d.get('scheme')!r}")
        return NormStats(col_min=np.asarray(d["col_min"], dtype=float),
                         col_max=np.asarray(d["col_max"], dtype=float))


def fit_normalizer(samples) -> NormStats:
    """Column-wise min/max over all station rows of the given samples."""
    samples = list(samples)
    if not samples:
        raise ValueError("cannot fit a normalizer on an empty split")
    stacked = np.concatenate([s.features for s in samples], axis=0)
    return NormStats(col_min=stacked.min(axis=0), col_max=stacked.max(axis=0))


def normalize_features(features: np.ndarray, stats: NormStats) -> np.ndarray:
    """Map columns affinely so the training min/max hit 0/1.

    Constant columns map to 0. Values outside the training range land
    outside [0, 1], which is intended for held-out data.
    """
    span = stats.col_max - stats.col_min
    safe = np.where(span > 0, span, 1.0)
    out = (features - stats.col_min) / safe
    return np.where(span > 0, out, 0.0)


def denormalize_features(normalized: np.ndarray, stats: NormStats) -> np.ndarray:
    """Inverse of :func:`normalize_features` (exact for constant columns)."""
    span = stats.col_max - stats.col_min
    return normalized * span + stats.col_min


def normalize_sample(sample: Sample, stats: NormStats) -> Sample:
    """Copy of ``sample`` with normalized features; targets untouched."""
    return replace(sample, features=normalize_features(sample.features, stats))
