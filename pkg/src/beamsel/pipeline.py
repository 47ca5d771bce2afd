"""Dataset generation: scene -> channels -> oracle labels -> features.

Users whose every mmWave link is blocked have no defined label; they are
excluded from the dataset and counted in the generation log.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, channel_vectors, path_from_geometry
from .codebook import calibrate_snr_scale, dft_codebook, exhaustive_search
from .config import RunConfig
from .dataset import Dataset
from .features import Sample, assemble_input, extract_features
from .scene import Scene, build_scene, scene_hash

log = logging.getLogger(__name__)


@dataclass
class GenerationResult:
    dataset: Dataset
    scene: Scene
    snr_scale: float
    excluded_users: list[int]
    log_lines: list[str] = field(default_factory=list)


def mmw_channel_set(cfg: RunConfig, scene: Scene, paths) -> ChannelSet:
    """Materialize every mmWave link's channel vectors as one array."""
    n_bs = len(scene.mmw)
    n_users = scene.n_users
    shape = (n_bs, n_users, cfg.mmw_band.subcarrier_limit,
             cfg.mmw_array.n_elements)
    channels = np.zeros(shape, dtype=np.complex128)
    for b in range(n_bs):
        for u in range(n_users):
            channels[b, u] = channel_vectors(paths[b][u], cfg.mmw_array,
                                             cfg.mmw_band)
    return ChannelSet(band=cfg.mmw_band, geometry=cfg.mmw_array,
                      scene_hash=scene_hash(scene), channels=channels)


def generate(cfg: RunConfig) -> GenerationResult:
    """Build the labeled dataset for one run configuration."""
    scene = build_scene(cfg.scene)
    shash = scene_hash(scene)
    n_users = scene.n_users
    lines = [f"scene: {len(scene.sub6)} sub-6GHz BS, {len(scene.mmw)} mmWave BS, "
             f"{n_users} users, {len(scene.buildings)} buildings, hash {shash}"]

    mmw_paths = [[path_from_geometry(bs, user, cfg.mmw_band, scene)
                  for user in scene.users] for bs in scene.mmw]
    sub6_paths = [[path_from_geometry(bs, user, cfg.sub6_band, scene)
                   for user in scene.users] for bs in scene.sub6]

    best_gains = []
    for u in range(n_users):
        g = max(mmw_paths[b][u].gain for b in range(len(scene.mmw)))
        if g > 0:
            best_gains.append(g)
    if cfg.raw["snr"]["scale"] == "auto":
        snr_scale = calibrate_snr_scale(best_gains,
                                        cfg.mmw_array.n_elements,
                                        cfg.mmw_band.subcarrier_limit,
                                        cfg.raw["snr"]["target_snr_db"])
        lines.append(f"snr_scale calibrated to {snr_scale!r} "
                     f"(target {cfg.raw['snr']['target_snr_db']} dB at the "
                     f"median covered user)")
    else:
        snr_scale = float(cfg.raw["snr"]["scale"])
        lines.append(f"snr_scale fixed by config: {snr_scale!r}")

    book = dft_codebook(cfg.mmw_array.n_elements, cfg.n_beams)
    samples: list[Sample] = []
    excluded: list[int] = []
    raw_targets: list[np.ndarray] = []
    label_hist = np.zeros(len(scene.mmw), dtype=int)
    for u in range(n_users):
        channels = [channel_vectors(mmw_paths[b][u], cfg.mmw_array, cfg.mmw_band)
                    for b in range(len(scene.mmw))]
        label = exhaustive_search(channels, book, snr_scale)
        if not label.coverage:
            excluded.append(u)
            continue
        rows = [extract_features(sub6_paths[b][u], cfg.sub6_band)
                for b in range(len(scene.sub6))]
        samples.append(Sample(
            user_id=u,
            features=assemble_input(rows, len(scene.sub6)),
            bs_label=label.bs_index,
            target=label.rate_vector,  # scaled below
            position=tuple(float(c) for c in scene.users[u]),
        ))
        raw_targets.append(label.rate_vector)
        label_hist[label.bs_index] += 1

    if not samples:
        lines.append("no covered users; dataset is empty")
    elif cfg.raw["target_scaling"] == "per_sample":
        for s in samples:
            s.target = s.target / s.target.max()
    else:
        global_max = max(float(t.max()) for t in raw_targets)
        for s in samples:
            s.target = s.target / global_max

    lines.append(f"labels: {len(samples)} covered users, "
                 f"{len(excluded)} excluded (no positive-rate mmWave link)")
    lines.append("label histogram per mmWave BS: "
                 + " ".join(f"{b}:{int(c)}" for b, c in enumerate(label_hist)))
    for line in lines:
        log.info("%s", line)

    meta = {
        "scene_hash": shash,
        "config_hash": cfg.hash,
        "snr_scale": float(snr_scale),
        "n_sub6_bs": len(scene.sub6),
        "n_mmw_bs": len(scene.mmw),
        "n_beams": cfg.n_beams,
        "n_users_total": n_users,
        "n_excluded": len(excluded),
    }
    return GenerationResult(dataset=Dataset(samples=samples, meta=meta),
                            scene=scene, snr_scale=float(snr_scale),
                            excluded_users=excluded, log_lines=lines)
