"""Codebook and oracle: rates checked against slow reference loops."""

import numpy as np
import pytest

from beamsel.codebook import (
    calibrate_snr_scale,
    beam_rate,
    dft_codebook,
    exhaustive_search,
    rate_vector,
    top_b_indices,
)
from beamsel.errors import ConfigurationError


def test_dft_codebook_structure():
    cb = dft_codebook(8, 4)
    assert cb.beams.shape == (4, 8)
    # spatial frequencies w_m = -1 + (2m+1)/M
    np.testing.assert_allclose(cb.spatial_frequencies,
                               [-0.75, -0.25, 0.25, 0.75])
    # every beam has unit norm
    np.testing.assert_allclose(np.linalg.norm(cb.beams, axis=1), np.ones(4),
                               atol=1e-12)
    # element-wise phase progression
    n = np.arange(8)
    for m in range(4):
        want = np.exp(1j * np.pi * cb.spatial_frequencies[m] * n) / np.sqrt(8)
        np.testing.assert_allclose(cb.beams[m], want, atol=1e-12)


def test_dft_codebook_orthogonal_when_square():
    cb = dft_codebook(16, 16)
    gram = cb.beams @ cb.beams.conj().T
    np.testing.assert_allclose(gram, np.eye(16), atol=1e-12)


def test_dft_codebook_validation():
    with pytest.raises(ConfigurationError):
        dft_codebook(0, 4)
    with pytest.raises(ConfigurationError):
        dft_codebook(4, 0)


def test_beam_rate_matches_manual_sum():
    rng = np.random.default_rng(4)
    ch = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    beam = rng.normal(size=4) + 1j * rng.normal(size=4)
    scale = 2.5
    want = 0.0
    for k in range(3):
        z = sum(ch[k, i] * beam[i] for i in range(4))
        want += np.log2(1.0 + scale * abs(z) ** 2)
    assert beam_rate(ch, beam, scale) == pytest.approx(want, rel=1e-12)


def test_rate_vector_matches_beam_rate_loop():
    rng = np.random.default_rng(5)
    cb = dft_codebook(4, 6)
    ch = rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4))
    rv = rate_vector(ch, cb, 1.7)
    want = [beam_rate(ch, cb.beams[m], 1.7) for m in range(6)]
    np.testing.assert_allclose(rv, want, rtol=1e-12)


def test_shape_and_scale_validation():
    cb = dft_codebook(4, 4)
    with pytest.raises(ValueError):
        rate_vector(np.zeros((2, 5), dtype=complex), cb, 1.0)
    with pytest.raises(ValueError):
        rate_vector(np.zeros((2, 4), dtype=complex), cb, -1.0)
    with pytest.raises(ValueError):
        beam_rate(np.zeros((2, 4), dtype=complex), np.zeros(3, dtype=complex),
                  1.0)


def _brute_force(channels, cb, scale):
    """Reference oracle: explicit triple loop, no vectorization."""
    best = (-1.0, 0, 0)
    for i, ch in enumerate(channels):
        for m in range(cb.n_beams):
            r = 0.0
            for k in range(ch.shape[0]):
                z = ch[k] @ cb.beams[m]
                r += np.log2(1.0 + scale * abs(z) ** 2)
            if r > best[0]:
                best = (r, i, m)
    return best[1], best[2], best[0]


def test_exhaustive_search_matches_brute_force():
    rng = np.random.default_rng(6)
    cb = dft_codebook(4, 4)
    for _ in range(100):
        n_bs = int(rng.integers(1, 4))
        channels = [rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4))
                    for _ in range(n_bs)]
        label = exhaustive_search(channels, cb, 1.0)
        bs, beam, rate = _brute_force(channels, cb, 1.0)
        assert label.bs_index == bs
        assert label.beam_index == beam
        assert label.rate == pytest.approx(rate, rel=1e-12)
        assert label.coverage
        np.testing.assert_allclose(
            label.rate_vector, rate_vector(channels[bs], cb, 1.0), rtol=1e-12)


def test_exhaustive_search_tie_breaks_low_indices():
    cb = dft_codebook(2, 2)
    ch = np.ones((1, 2), dtype=complex)
    # identical stations: every (bs, beam) rate duplicates across stations
    label = exhaustive_search([ch, ch.copy()], cb, 1.0)
    assert label.bs_index == 0
    rv = rate_vector(ch, cb, 1.0)
    assert label.beam_index == int(np.argmax(rv))


def test_exhaustive_search_no_coverage():
    cb = dft_codebook(4, 4)
    zero = np.zeros((2, 4), dtype=complex)
    label = exhaustive_search([zero, zero], cb, 1.0)
    assert not label.coverage
    assert label.rate == 0.0
    assert label.bs_index == 0 and label.beam_index == 0


def test_broadside_null_of_even_codebook():
    # An all-ones channel is orthogonal to every beam of an even-sized DFT
    # grid (each offset completes full cycles), so no beam carries rate.
    cb = dft_codebook(4, 2)
    ch = np.ones((1, 4), dtype=complex)
    rv = rate_vector(ch, cb, 1e6)
    np.testing.assert_allclose(rv, np.zeros(2), atol=1e-20)
    label = exhaustive_search([ch], cb, 1e6)
    assert not label.coverage


def test_top_b_indices_stable_order():
    rates = np.array([0.5, 2.0, 2.0, 0.1])
    np.testing.assert_array_equal(top_b_indices(rates, 3), [1, 2, 0])
    np.testing.assert_array_equal(top_b_indices(rates, 1), [1])
    with pytest.raises(ValueError):
        top_b_indices(rates, 0)
    with pytest.raises(ValueError):
        top_b_indices(rates, 5)


def test_top_b_contains_all_larger_entries():
    rng = np.random.default_rng(7)
    for _ in range(200):
        rates = rng.normal(size=8)
        b = int(rng.integers(1, 9))
        idx = top_b_indices(rates, b)
        assert len(set(idx.tolist())) == b
        thresh = np.min(rates[idx])
        # no excluded entry may be strictly larger than an included one
        excluded = np.setdiff1d(np.arange(8), idx)
        if excluded.size:
            assert np.max(rates[excluded]) <= thresh + 1e-15


def test_calibrate_snr_scale_formula():
    gains = [1e-9, 4e-9, 2e-9]
    scale = calibrate_snr_scale(gains, n_elements=32, n_subcarriers=64,
                                target_snr_db=10.0)
    want = 10.0 * 64 / (2e-9 * 32)
    assert scale == pytest.approx(want, rel=1e-12)
    # at the matched beam the median user then hits the target SNR
    snr = scale * 2e-9 * 32 / 64
    assert 10.0 * np.log10(snr) == pytest.approx(10.0, abs=1e-12)


def test_calibrate_snr_scale_rejects_empty():
    with pytest.raises(ConfigurationError):
        calibrate_snr_scale([], 32, 64)
    with pytest.raises(ConfigurationError):
        calibrate_snr_scale([0.0, 0.0], 32, 64)
