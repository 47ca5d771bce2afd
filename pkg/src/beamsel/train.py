"""Mini-batch training loop, deterministic splits, and the data sweep.

Everything is seeded: the split shuffle, the per-epoch batch order, and
the parameter init all derive from explicit seeds, so a (dataset,
config) pair fully determines the trained parameters and the history.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .errors import ConfigurationError, NumericalError
from .evaluation import evaluate
from .features import Sample
from .model import Model, ModelConfig, backward, forward, init_model, loss

HISTORY_FORMAT = "beamsel-history"
HISTORY_VERSION = 1

SWEEP_FORMAT = "beamsel-sweep"
SWEEP_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"        # "adam" or "sgd"
    split_ratio: float = 0.8
    training_data_fraction: float = 1.0
    lambda_cls: float = 1.0
    lambda_reg: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # optional step decay: lr is multiplied by decay_factor once at decay_epoch
    lr_decay_epoch: int = 0        # 0 disables the decay step
    lr_decay_factor: float = 0.1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigurationError("split_ratio must be in (0, 1)")
        if not 0.0 < self.training_data_fraction <= 1.0:
            raise ConfigurationError("training_data_fraction must be in (0, 1]")
        if self.lambda_cls < 0 or self.lambda_reg < 0:
            raise ConfigurationError("loss weights must be >= 0")
        if self.lr_decay_epoch < 0:
            raise ConfigurationError("lr_decay_epoch must be >= 0")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ConfigurationError("lr_decay_factor must be in (0, 1]")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    bs_accuracy: float
    beam_top1: float
    beam_top3: float
    total_accuracy: float


@dataclass
class History:
    rows: list[EpochStats] = field(default_factory=list)
    config_hash: str = ""

    def final(self) -> EpochStats:
        if not self.rows:
            raise ValueError("history is empty")
        return self.rows[-1]


def split_dataset(samples, ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled split into (train indices, test indices).

    The returned order matters: data-fraction runs take prefixes of the
    training list.
    """
    n = len(samples)
    if n < 2:
        raise ValueError("need at least two samples to split")
    if not 0.0 < ratio < 1.0:
        raise ValueError("split ratio must be in (0, 1)")
    n_train = int(round(ratio * n))
    n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return perm[:n_train], perm[n_train:]


def _epoch_metrics(model: Model, samples) -> tuple[float, float, float, float]:
    report = evaluate(model, samples, b=1)
    top3 = 3 if model.config.n_beams >= 3 else model.config.n_beams
    return (report.bs_accuracy,
            float(report.beam_accuracy_curve[0]),
            float(report.beam_accuracy_curve[top3 - 1]),
            float(report.total_accuracy_curve[0]))


def train(model: Model, samples: list[Sample], cfg: TrainConfig,
          train_idx: np.ndarray, test_idx: np.ndarray,
          config_hash: str = "") -> tuple[Model, History]:
    """Train in place and report per-epoch validation metrics.

    Only the first ``training_data_fraction`` of ``train_idx`` is used
    (the list is already shuffled by :func:`split_dataset`). Aborts with
    :class:`NumericalError` if the loss leaves the finite range.
    """
    train_idx = np.asarray(train_idx, dtype=int)
    test_idx = np.asarray(test_idx, dtype=int)
    n_used = max(1, int(np.ceil(cfg.training_data_fraction * len(train_idx))))
    used = train_idx[:n_used]

    x_train = np.stack([samples[i].features for i in used])
    y_train = np.array([samples[i].bs_label for i in used])
    t_train = np.stack([samples[i].target for i in used])
    val_samples = [samples[i] for i in test_idx]

    opt_m = {k: np.zeros_like(v) for k, v in model.params.items()}
    opt_v = {k: np.zeros_like(v) for k, v in model.params.items()}
    step = 0

    rng = np.random.default_rng(cfg.rng_seed)
    history = History(config_hash=config_hash)
    lr = cfg.learning_rate
    for epoch in range(1, cfg.epochs + 1):
        if cfg.lr_decay_epoch and epoch == cfg.lr_decay_epoch:
            lr = cfg.learning_rate * cfg.lr_decay_factor
        order = rng.permutation(len(used))
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            output, cache = forward(model, x_train[sel])
            batch_loss = loss(output, y_train[sel], t_train[sel],
                              cfg.lambda_cls, cfg.lambda_reg)
            if not np.isfinite(batch_loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}: the optimization "
                    f"diverged; lower learning_rate (currently "
                    f"{cfg.learning_rate}) or the loss weights"
                )
            batch_losses.append(batch_loss)
            grads = backward(model, cache, y_train[sel], t_train[sel],
                             cfg.lambda_cls, cfg.lambda_reg)
            step += 1
            for name, g in grads.items():
                if cfg.optimizer == "sgd":
                    model.params[name] -= lr * g
                else:
                    opt_m[name] = cfg.adam_beta1 * opt_m[name] + (1 - cfg.adam_beta1) * g
                    opt_v[name] = cfg.adam_beta2 * opt_v[name] + (1 - cfg.adam_beta2) * g * g
                    m_hat = opt_m[name] / (1 - cfg.adam_beta1 ** step)
                    v_hat = opt_v[name] / (1 - cfg.adam_beta2 ** step)
                    model.params[name] -= (lr * m_hat
                                           / (np.sqrt(v_hat) + cfg.adam_eps))
        bs_acc, top1, top3, total = _epoch_metrics(model, val_samples)
        history.rows.append(EpochStats(
            epoch=epoch,
            train_loss=float(np.mean(batch_losses)),
            bs_accuracy=bs_acc, beam_top1=top1, beam_top3=top3,
            total_accuracy=total,
        ))
    return model, history


# ---------------------------------------------------------------------------
# history files
# ---------------------------------------------------------------------------

_HISTORY_COLUMNS = ("epoch", "train_loss", "bs_accuracy", "beam_top1",
                    "beam_top3", "total_accuracy")


def save_history(history: History, path) -> None:
    lines = [f"# {HISTORY_FORMAT} v{HISTORY_VERSION}",
             f"# config_hash={history.config_hash}",
             ",".join(_HISTORY_COLUMNS)]
    for r in history.rows:
        lines.append(",".join([str(r.epoch), repr(r.train_loss),
                               repr(r.bs_accuracy), repr(r.beam_top1),
                               repr(r.beam_top3), repr(r.total_accuracy)]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def load_history(path) -> History:
    from .errors import DataFormatError
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(f"# {HISTORY_FORMAT} v"):
        raise DataFormatError(f"{path}: not a history file")
    config_hash = ""
    idx = 1
    while idx < len(lines) and lines[idx].startswith("#"):
        key, value = lines[idx][1:].strip().split("=", 1)
        if key == "config_hash":
            config_hash = value
        idx += 1
    if idx >= len(lines) or lines[idx].split(",") != list(_HISTORY_COLUMNS):
        raise DataFormatError(f"{path}: bad history columns")
    history = History(config_hash=config_hash)
    for line in lines[idx + 1:]:
        if not line:
            continue
        parts = line.split(",")
        history.rows.append(EpochStats(
            epoch=int(parts[0]), train_loss=float(parts[1]),
            bs_accuracy=float(parts[2]), beam_top1=float(parts[3]),
            beam_top3=float(parts[4]), total_accuracy=float(parts[5])))
    return history


# ---------------------------------------------------------------------------
# training-data sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    fraction: float
    n_train: int
    bs_accuracy: float
    beam_top1: float
    beam_top3: float
    total_accuracy: float


def ratio_sweep(model_cfg: ModelConfig, samples: list[Sample],
                fractions, cfg: TrainConfig,
                train_idx: np.ndarray, test_idx: np.ndarray,
                config_hash: str = "") -> list[SweepRow]:
    """Retrain from a fresh (identically seeded) init per data fraction.

    The test split stays fixed; each point uses the leading fraction of
    the shuffled training list, so fraction 1.0 reproduces a plain
    training run exactly.
    """
    fractions = sorted(float(f) for f in fractions)
    if not fractions:
        raise ValueError("sweep needs at least one fraction")
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"fraction {f} outside (0, 1]")
    rows = []
    for f in fractions:
        point_cfg = replace(cfg, training_data_fraction=f)
        fresh = init_model(model_cfg)
        fresh, history = train(fresh, samples, point_cfg, train_idx, test_idx,
                               config_hash)
        final = history.final()
        n_used = max(1, int(np.ceil(f * len(train_idx))))
        rows.append(SweepRow(fraction=f, n_train=n_used,
                             bs_accuracy=final.bs_accuracy,
                             beam_top1=final.beam_top1,
                             beam_top3=final.beam_top3,
                             total_accuracy=final.total_accuracy))
    return rows


_SWEEP_COLUMNS = ("fraction", "n_train", "bs_accuracy", "beam_top1",
                  "beam_top3", "total_accuracy")


def save_sweep(rows: list[SweepRow], path, config_hash: str = "") -> None:
    lines = [f"# {SWEEP_FORMAT} v{SWEEP_VERSION}",
             f"# config_hash={config_hash}",
             ",".join(_SWEEP_COLUMNS)]
    for r in rows:
        lines.append(",".join([repr(r.fraction), str(r.n_train),
                               repr(r.bs_accuracy), repr(r.beam_top1),
                               repr(r.beam_top3), repr(r.total_accuracy)]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
