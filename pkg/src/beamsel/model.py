"""Branched selection network with analytic gradients, numpy only.

Topology, for an input of shape (n_sub6_bs, N_FEATURES):

  conv1   1 x n_f kernel, 32 filters: the same small dense map applied
          to every station row               -> (n_sub6_bs, 32), ReLU
  conv2   n_sub6_bs x 32 kernel, 64 filters: one valid step collapsing
          the station axis                   -> (64,), ReLU
  base    dense 128 -> ReLU -> dense 256 -> ReLU
  branch A (station selection)
          dense 128 -> ReLU -> dense 64 -> ReLU (= hA)
          -> dense n_mmw_bs -> softmax
  branch B (beam rate regression)
          dense 128 -> ReLU -> dense 64 -> ReLU (= hB)
          -> concat [hB, hA] -> dense 128 -> ReLU -> dense n_beams -> ReLU

The concatenation makes branch B condition on branch A's hidden state;
its gradient therefore flows into both branches. Loss is
lambda_cls * cross-entropy (natural log) + lambda_reg * mean squared
error. All tensors are float64 and every step is deterministic given
the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigurationError, DataFormatError
from .features import N_FEATURES, NormStats

CHECKPOINT_FORMAT = "beamsel-checkpoint"
CHECKPOINT_VERSION = 1

# log() guard: keeps -log(p) finite if a softmax output underflows to 0
# while leaving any representable positive probability untouched.
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class ModelConfig:
    """Sizes and initialization seed of the branched network."""

    n_sub6_bs: int
    n_mmw_bs: int
    n_beams: int
    n_features: int = N_FEATURES
    conv1_filters: int = 32
    conv2_filters: int = 64
    base_dense: tuple[int, int] = (128, 256)
    branch_dense: tuple[int, int] = (128, 64)
    concat_dense: int = 128
    init: str = "uniform-fanin"
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_sub6_bs", "n_mmw_bs", "n_beams", "n_features",
                     "conv1_filters", "conv2_filters", "concat_dense"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"model size {name} must be >= 1")
        if len(self.base_dense) != 2 or len(self.branch_dense) != 2:
            raise ConfigurationError("base_dense and branch_dense take two sizes")
        if self.init != "uniform-fanin":
            raise ConfigurationError(f"unknown init scheme {self.init!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["base_dense"] = list(self.base_dense)
        d["branch_dense"] = list(self.branch_dense)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        d["base_dense"] = tuple(d["base_dense"])
        d["branch_dense"] = tuple(d["branch_dense"])
        return ModelConfig(**d)


@dataclass
class Model:
    """Parameter store; ``params`` maps tensor name to float64 array."""

    config: ModelConfig
    params: dict[str, np.ndarray]
    norm_stats: NormStats | None = None


@dataclass
class Output:
    """Network output for a batch: station probabilities and beam rates."""

    bs_probs: np.ndarray    # (batch, n_mmw_bs), rows sum to 1
    beam_rates: np.ndarray  # (batch, n_beams), non-negative


# Tensor shapes in a fixed order; initialization and checkpoints rely on it.
def _tensor_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    d1, d2 = cfg.base_dense
    b1, b2 = cfg.branch_dense
    return [
        ("conv1_w", (cfg.n_features, cfg.conv1_filters)),
        ("conv1_b", (cfg.conv1_filters,)),
        ("conv2_w", (cfg.n_sub6_bs * cfg.conv1_filters, cfg.conv2_filters)),
        ("conv2_b", (cfg.conv2_filters,)),
        ("base1_w", (cfg.conv2_filters, d1)),
        ("base1_b", (d1,)),
        ("base2_w", (d1, d2)),
        ("base2_b", (d2,)),
        ("bs1_w", (d2, b1)),
        ("bs1_b", (b1,)),
        ("bs2_w", (b1, b2)),
        ("bs2_b", (b2,)),
        ("bs_out_w", (b2, cfg.n_mmw_bs)),
        ("bs_out_b", (cfg.n_mmw_bs,)),
        ("beam1_w", (d2, b1)),
        ("beam1_b", (b1,)),
        ("beam2_w", (b1, b2)),
        ("beam2_b", (b2,)),
        ("beam3_w", (2 * b2, cfg.concat_dense)),
        ("beam3_b", (cfg.concat_dense,)),
        ("beam_out_w", (cfg.concat_dense, cfg.n_beams)),
        ("beam_out_b", (cfg.n_beams,)),
    ]


def param_count(cfg: ModelConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape in _tensor_shapes(cfg))


def init_model(cfg: ModelConfig) -> Model:
    """Seeded init: weights uniform in +-sqrt(6/fan_in), biases zero."""
    rng = np.random.default_rng(cfg.rng_seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in _tensor_shapes(cfg):
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            bound = math.sqrt(6.0 / shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return Model(config=cfg, params=params)


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _as_batch(x: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[None, :, :]
    if x.ndim != 3 or x.shape[1:] != (cfg.n_sub6_bs, cfg.n_features):
        raise ValueError(
            f"input shape {x.shape} incompatible with "
            f"({cfg.n_sub6_bs}, {cfg.n_features})"
        )
    return x


def forward(model: Model, x: np.ndarray) -> tuple[Output, dict]:
    """Batched forward pass; returns the output and the activation cache."""
    cfg = model.config
    p = model.params
    x = _as_batch(x, cfg)
    batch = x.shape[0]

    z1 = x @ p["conv1_w"] + p["conv1_b"]          # (B, n_bs, c1)
    a1 = _relu(z1)
    flat = a1.reshape(batch, -1)                  # (B, n_bs * c1)
    z2 = flat @ p["conv2_w"] + p["conv2_b"]
    a2 = _relu(z2)
    z3 = a2 @ p["base1_w"] + p["base1_b"]
    a3 = _relu(z3)
    z4 = a3 @ p["base2_w"] + p["base2_b"]
    a4 = _relu(z4)

    z5 = a4 @ p["bs1_w"] + p["bs1_b"]
    a5 = _relu(z5)
    z6 = a5 @ p["bs2_w"] + p["bs2_b"]
    ha = _relu(z6)
    logits = ha @ p["bs_out_w"] + p["bs_out_b"]
    probs = _softmax(logits)

    z8 = a4 @ p["beam1_w"] + p["beam1_b"]
    a8 = _relu(z8)
    z9 = a8 @ p["beam2_w"] + p["beam2_b"]
    hb = _relu(z9)
    cat = np.concatenate([hb, ha], axis=1)
    z10 = cat @ p["beam3_w"] + p["beam3_b"]
    a10 = _relu(z10)
    z11 = a10 @ p["beam_out_w"] + p["beam_out_b"]
    rates = _relu(z11)

    cache = {"x": x, "z1": z1, "a1": a1, "flat": flat, "z2": z2, "a2": a2,
             "z3": z3, "a3": a3, "z4": z4, "a4": a4, "z5": z5, "a5": a5,
             "z6": z6, "ha": ha, "probs": probs, "z8": z8, "a8": a8,
             "z9": z9, "hb": hb, "cat": cat, "z10": z10, "a10": a10,
             "z11": z11, "rates": rates}
    return Output(bs_probs=probs, beam_rates=rates), cache


def loss(output: Output, bs_labels, targets, lambda_cls: float = 1.0,
         lambda_reg: float = 1.0) -> float:
    """Mean combined loss over the batch.

    Cross-entropy uses the natural log; the squared error is averaged
    over beam entries. Perfect outputs give exactly zero.
    """
    probs = np.atleast_2d(output.bs_probs)
    rates = np.atleast_2d(output.beam_rates)
    bs_labels = np.atleast_1d(np.asarray(bs_labels, dtype=int))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    batch = probs.shape[0]
    if bs_labels.shape[0] != batch or targets.shape != rates.shape:
        raise ValueError("label shapes disagree with the output batch")
    picked = probs[np.arange(batch), bs_labels]
    ce = float(np.mean(-np.log(np.maximum(picked, _LOG_FLOOR))))
    mse = float(np.mean((rates - targets) ** 2))
    return lambda_cls * ce + lambda_reg * mse


def backward(model: Model, cache: dict, bs_labels, targets,
             lambda_cls: float = 1.0, lambda_reg: float = 1.0) -> dict[str, np.ndarray]:
    """Gradients of :func:`loss` w.r.t. every parameter tensor.

    The concat node splits the incoming gradient between hB and hA, so
    branch A receives contributions from both heads.
    """
    p = model.params
    x = cache["x"]
    batch = x.shape[0]
    bs_labels = np.atleast_1d(np.asarray(bs_labels, dtype=int))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))

    g: dict[str, np.ndarray] = {}

    # classification head: d(CE)/d(logits) = probs - onehot
    d_logits = cache["probs"].copy()
    d_logits[np.arange(batch), bs_labels] -= 1.0
    d_logits *= lambda_cls / batch

    # regression head through the output ReLU
    n_beams = targets.shape[1]
    d_z11 = (2.0 * lambda_reg / (batch * n_beams)) * (cache["rates"] - targets)
    d_z11 = d_z11 * (cache["z11"] > 0)

    g["beam_out_w"] = cache["a10"].T @ d_z11
    g["beam_out_b"] = d_z11.sum(axis=0)
    d_a10 = d_z11 @ p["beam_out_w"].T
    d_z10 = d_a10 * (cache["z10"] > 0)
    g["beam3_w"] = cache["cat"].T @ d_z10
    g["beam3_b"] = d_z10.sum(axis=0)
    d_cat = d_z10 @ p["beam3_w"].T
    width = cache["hb"].shape[1]
    d_hb = d_cat[:, :width]
    d_ha_concat = d_cat[:, width:]

    g["bs_out_w"] = cache["ha"].T @ d_logits
    g["bs_out_b"] = d_logits.sum(axis=0)
    d_ha = d_logits @ p["bs_out_w"].T + d_ha_concat

    d_z6 = d_ha * (cache["z6"] > 0)
    g["bs2_w"] = cache["a5"].T @ d_z6
    g["bs2_b"] = d_z6.sum(axis=0)
    d_a5 = d_z6 @ p["bs2_w"].T
    d_z5 = d_a5 * (cache["z5"] > 0)
    g["bs1_w"] = cache["a4"].T @ d_z5
    g["bs1_b"] = d_z5.sum(axis=0)

    d_z9 = d_hb * (cache["z9"] > 0)
    g["beam2_w"] = cache["a8"].T @ d_z9
    g["beam2_b"] = d_z9.sum(axis=0)
    d_a8 = d_z9 @ p["beam2_w"].T
    d_z8 = d_a8 * (cache["z8"] > 0)
    g["beam1_w"] = cache["a4"].T @ d_z8
    g["beam1_b"] = d_z8.sum(axis=0)

    d_a4 = d_z5 @ p["bs1_w"].T + d_z8 @ p["beam1_w"].T
    d_z4 = d_a4 * (cache["z4"] > 0)
    g["base2_w"] = cache["a3"].T @ d_z4
    g["base2_b"] = d_z4.sum(axis=0)
    d_a3 = d_z4 @ p["base2_w"].T
    d_z3 = d_a3 * (cache["z3"] > 0)
    g["base1_w"] = cache["a2"].T @ d_z3
    g["base1_b"] = d_z3.sum(axis=0)
    d_a2 = d_z3 @ p["base1_w"].T
    d_z2 = d_a2 * (cache["z2"] > 0)
    g["conv2_w"] = cache["flat"].T @ d_z2
    g["conv2_b"] = d_z2.sum(axis=0)
    d_flat = d_z2 @ p["conv2_w"].T
    d_a1 = d_flat.reshape(cache["a1"].shape)
    d_z1 = d_a1 * (cache["z1"] > 0)
    # conv1 weights are shared across station rows: fold rows into batch.
    n_feat = x.shape[2]
    g["conv1_w"] = x.reshape(-1, n_feat).T @ d_z1.reshape(-1, d_z1.shape[2])
    g["conv1_b"] = d_z1.sum(axis=(0, 1))
    return g


def predict(model: Model, x: np.ndarray, b: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Hard decisions: station argmax and the top-``b`` beam indices.

    Returns (stations (batch,), beams (batch, b)); ties resolve to the
    lowest index on both heads.
    """
    output, _ = forward(model, x)
    return predict_from_output(output, b)


def predict_from_output(output: Output, b: int = 1) -> tuple[np.ndarray, np.ndarray]:
    probs = np.atleast_2d(output.bs_probs)
    rates = np.atleast_2d(output.beam_rates)
    if not 1 <= b <= rates.shape[1]:
        raise ValueError(f"b={b} outside 1..{rates.shape[1]}")
    stations = np.argmax(probs, axis=1)
    beams = np.argsort(-rates, axis=1, kind="stable")[:, :b]
    return stations, beams


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------

def gradient_check(model: Model, x, bs_labels, targets, eps: float = 1e-5,
                   lambda_cls: float = 1.0, lambda_reg: float = 1.0) -> dict[str, float]:
    """Max relative error between analytic and central-difference grads.

    Perturbs every scalar parameter of every tensor. Relative error uses
    |a - n| / max(|a|, |n|, 1e-6) so near-zero pairs do not blow up.
    Returns {tensor name: max relative error}.
    """
    output, cache = forward(model, x)
    analytic = backward(model, cache, bs_labels, targets, lambda_cls, lambda_reg)

    def f() -> float:
        out, _ = forward(model, x)
        return loss(out, bs_labels, targets, lambda_cls, lambda_reg)

    report: dict[str, float] = {}
    for name, tensor in model.params.items():
        flat = tensor.ravel()
        grad_flat = analytic[name].ravel()
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f()
            flat[i] = orig - eps
            lo = f()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            a = grad_flat[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            if rel > worst:
                worst = rel
        report[name] = worst
    return report


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_model(model: Model, path, config_hash: str = "") -> None:
    """Self-describing checkpoint: JSON header line + float64 LE tensors."""
    names = [name for name, _ in _tensor_shapes(model.config)]
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "config_hash": config_hash,
        "norm_stats": model.norm_stats.to_dict() if model.norm_stats else None,
        "tensors": [{"name": n, "shape": list(model.params[n].shape)}
                    for n in names],
        "dtype": "<f8",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes())


def load_model(path) -> tuple[Model, str]:
    """Load a checkpoint; returns (model, stored config hash)."""
    try:
        with open(path, "rb") as fh:
            header_line = fh.readline()
            blob = fh.read()
    except OSError as exc:
        raise DataFormatError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: invalid checkpoint header") from exc
    if header.get("format") != CHECKPOINT_FORMAT:
        raise DataFormatError(f"{path}: not a checkpoint file")
    if header.get("version") != CHECKPOINT_VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version")
    cfg = ModelConfig.from_dict(header["config"])
    params: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) * 8
        chunk = blob[offset:offset + size]
        if len(chunk) != size:
            raise DataFormatError(f"{path}: truncated tensor {entry['name']}")
        params[entry["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += size
    if offset != len(blob):
        raise DataFormatError(f"{path}: {len(blob) - offset} trailing bytes")
    expected = {name for name, _ in _tensor_shapes(cfg)}
    if set(params) != expected:
        raise DataFormatError(f"{path}: tensor names disagree with config")
    stats = (NormStats.from_dict(header["norm_stats"])
             if header.get("norm_stats") else None)
    return Model(config=cfg, params=params, norm_stats=stats), header.get("config_hash", "")
