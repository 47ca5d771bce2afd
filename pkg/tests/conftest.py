"""Shared fixtures: small configs that keep unit tests fast."""

import numpy as np
import pytest

from beamsel.channel import ArrayGeometry, BandConfig
from beamsel.model import ModelConfig
from beamsel.scene import SceneConfig


@pytest.fixture
def small_band():
    # 2 sampled subcarriers keep hand calculations short
    return BandConfig(
        name="test-band",
        carrier_frequency=3.0e9,
        bandwidth=1.0e7,
        n_subcarriers_total=64,
        sampling_factor=1,
        subcarrier_limit=2,
        tx_power=1.0,
        noise_variance=1.0,
        blocked_attenuation_db=20.0,
    )


@pytest.fixture
def small_array():
    return ArrayGeometry(n_elements=4, spacing_wavelengths=0.5)


@pytest.fixture
def small_model_config():
    return ModelConfig(
        n_sub6_bs=2,
        n_mmw_bs=3,
        n_beams=4,
        n_features=5,
        conv1_filters=4,
        conv2_filters=6,
        base_dense=(8, 10),
        branch_dense=(6, 5),
        concat_dense=7,
        rng_seed=7,
    )


@pytest.fixture
def small_scene_config():
    return SceneConfig(
        road_length=40.0,
        road_width=10.0,
        n_sub6_bs=2,
        n_mmw_bs=2,
        user_grid_spacing=4.0,
        user_rows=2,
        rng_seed=0,
    )


def make_samples(rng, n, n_sub6=2, n_beams=4):
    """Random normalized samples for model and metric tests."""
    from beamsel.features import Sample

    out = []
    for i in range(n):
        target = rng.uniform(0.0, 1.0, size=n_beams)
        target[rng.integers(0, n_beams)] = 1.0  # per-sample max pinned at 1
        out.append(Sample(
            user_id=i,
            features=rng.uniform(0.0, 1.0, size=(n_sub6, 5)),
            bs_label=int(rng.integers(0, 3)),
            target=target,
            position=(float(i), 0.0, 1.5),
        ))
    return out
