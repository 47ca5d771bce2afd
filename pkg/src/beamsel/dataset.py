"""Dataset file format and split persistence.

A dataset is a line-record text file: '#'-prefixed header lines with
versioned key=value metadata, one CSV column-name line, then one record
per covered user (user id, flattened feature matrix, station label,
normalized rate targets, diagnostic position). Floats are written with
``repr`` so a write/read round trip is exact and re-runs are
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError
from .features import FEATURE_COLUMNS, N_FEATURES, Sample

DATASET_FORMAT = "beamsel-dataset"
DATASET_VERSION = 1

SPLIT_FORMAT = "beamsel-split"
SPLIT_VERSION = 1

# Header keys every dataset file must carry.
_REQUIRED_META = ("scene_hash", "config_hash", "snr_scale", "n_sub6_bs",
                  "n_mmw_bs", "n_beams", "n_users_total", "n_excluded")


@dataclass
class Dataset:
    """In-memory dataset: samples plus generation metadata."""

    samples: list[Sample]
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n_sub6_bs(self) -> int:
        return int(self.meta["n_sub6_bs"])

    @property
    def n_mmw_bs(self) -> int:
        return int(self.meta["n_mmw_bs"])

    @property
    def n_beams(self) -> int:
        return int(self.meta["n_beams"])


def _columns(n_sub6_bs: int, n_beams: int) -> list[str]:
    cols = ["user_id"]
    for b in range(n_sub6_bs):
        cols += [f"{name}_bs{b}" for name in FEATURE_COLUMNS]
    cols.append("bs_label")
    cols += [f"target_{m}" for m in range(n_beams)]
    cols += ["pos_x", "pos_y", "pos_z"]
    return cols


def save_dataset(ds: Dataset, path) -> None:
    """Write the dataset in the versioned line-record format."""
    n_sub6 = ds.n_sub6_bs
    n_beams = ds.n_beams
    lines = [f"# {DATASET_FORMAT} v{DATASET_VERSION}"]
    for key in _REQUIRED_META:
        lines.append(f"# {key}={ds.meta[key]!r}" if isinstance(ds.meta[key], float)
                     else f"# {key}={ds.meta[key]}")
    lines.append(f"# feature_columns={','.join(FEATURE_COLUMNS)}")
    lines.append(",".join(_columns(n_sub6, n_beams)))
    for s in ds.samples:
        if s.features.shape != (n_sub6, N_FEATURES):
            raise ValueError(f"sample {s.user_id}: feature shape {s.features.shape}")
        if s.target.shape != (n_beams,):
            raise ValueError(f"sample {s.user_id}: target shape {s.target.shape}")
        parts = [str(s.user_id)]
        parts += [repr(float(v)) for v in s.features.ravel()]
        parts.append(str(s.bs_label))
        parts += [repr(float(v)) for v in s.target]
        parts += [repr(float(v)) for v in s.position]
        lines.append(",".join(parts))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def load_dataset(path) -> Dataset:
    """Read a file written by :func:`save_dataset`, validating the header."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read dataset {path}: {exc}") from exc
    if not lines or not lines[0].startswith(f"# {DATASET_FORMAT} v"):
        raise DataFormatError(f"{path}: not a {DATASET_FORMAT} file")
    version = lines[0].removeprefix(f"# {DATASET_FORMAT} v").strip()
    if version != str(DATASET_VERSION):
        raise DataFormatError(f"{path}: unsupported dataset version {version}")

    meta: dict = {}
    idx = 1
    while idx < len(lines) and lines[idx].startswith("#"):
        body = lines[idx][1:].strip()
        if "=" in body:
            key, value = body.split("=", 1)
            meta[key.strip()] = value.strip()
        idx += 1
    for key in _REQUIRED_META:
        if key not in meta:
            raise DataFormatError(f"{path}: header misses {key}")
    for key in ("n_sub6_bs", "n_mmw_bs", "n_beams", "n_users_total", "n_excluded"):
        meta[key] = int(meta[key])
    meta["snr_scale"] = float(meta["snr_scale"])

    if idx >= len(lines):
        raise DataFormatError(f"{path}: missing column header")
    expected_cols = _columns(meta["n_sub6_bs"], meta["n_beams"])
    got_cols = lines[idx].split(",")
    if got_cols != expected_cols:
        raise DataFormatError(f"{path}: column header disagrees with metadata")
    idx += 1

    n_sub6 = meta["n_sub6_bs"]
    n_beams = meta["n_beams"]
    samples: list[Sample] = []
    for ln, line in enumerate(lines[idx:], start=idx + 1):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(expected_cols):
            raise DataFormatError(f"{path}:{ln}: expected {len(expected_cols)} "
                                  f"fields, got {len(parts)}")
        try:
            user_id = int(parts[0])
            flat = np.array([float(v) for v in parts[1:1 + n_sub6 * N_FEATURES]])
            bs_label = int(parts[1 + n_sub6 * N_FEATURES])
            t0 = 2 + n_sub6 * N_FEATURES
            target = np.array([float(v) for v in parts[t0:t0 + n_beams]])
            pos = tuple(float(v) for v in parts[t0 + n_beams:])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{ln}: bad record: {exc}") from exc
        samples.append(Sample(user_id=user_id,
                              features=flat.reshape(n_sub6, N_FEATURES),
                              bs_label=bs_label, target=target, position=pos))
    return Dataset(samples=samples, meta=meta)


def file_sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def save_split(path, train_idx, test_idx, seed: int, ratio: float) -> None:
    """Persist split index lists (order matters: fractions take prefixes)."""
    payload = {
        "format": SPLIT_FORMAT,
        "version": SPLIT_VERSION,
        "seed": int(seed),
        "ratio": float(ratio),
        "train": [int(i) for i in train_idx],
        "test": [int(i) for i in test_idx],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_split(path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read split {path}: {exc}") from exc
    if payload.get("format") != SPLIT_FORMAT:
        raise DataFormatError(f"{path}: not a split file")
    if payload.get("version") != SPLIT_VERSION:
        raise DataFormatError(f"{path}: unsupported split version")
    return (np.asarray(payload["train"], dtype=int),
            np.asarray(payload["test"], dtype=int))
