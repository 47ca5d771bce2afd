"""Figure rendering for the report paths.

Every command that writes a delimited table also renders the matching
figure next to it: training curves, accuracy versus training-data
fraction, and accuracy versus the number of measured beams. Rendering
is file-only (Agg backend) and metadata-stripped so repeated runs
produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport
from .train import History, SweepRow

_PNG_META = {"Software": "beamsel"}


def _new_axes(xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)


def plot_history(history: History, path) -> None:
    """Validation accuracies and training loss over epochs."""
    epochs = [r.epoch for r in history.rows]
    fig, ax = _new_axes("epoch", "accuracy")
    ax.plot(epochs, [r.bs_accuracy for r in history.rows], label="BS")
    ax.plot(epochs, [r.beam_top1 for r in history.rows], label="beam top-1")
    ax.plot(epochs, [r.beam_top3 for r in history.rows], label="beam top-3")
    ax.plot(epochs, [r.total_accuracy for r in history.rows], label="total")
    ax.set_ylim(0.0, 1.02)
    ax2 = ax.twinx()
    ax2.plot(epochs, [r.train_loss for r in history.rows],
             color="gray", linestyle="--", alpha=0.6, label="train loss")
    ax2.set_ylabel("train loss")
    ax.legend(loc="lower right")
    _save(fig, path)


def plot_sweep(rows: list[SweepRow], path) -> None:
    """Final accuracies versus training-data fraction."""
    fracs = [r.fraction for r in rows]
    fig, ax = _new_axes("training data fraction", "accuracy")
    ax.plot(fracs, [r.bs_accuracy for r in rows], marker="o", label="BS")
    ax.plot(fracs, [r.beam_top1 for r in rows], marker="s", label="beam top-1")
    ax.plot(fracs, [r.beam_top3 for r in rows], marker="^", label="beam top-3")
    ax.plot(fracs, [r.total_accuracy for r in rows], marker="d", label="total")
    ax.set_ylim(0.0, 1.02)
    ax.legend(loc="lower right")
    _save(fig, path)


def plot_beam_levels(report: EvalReport, path) -> None:
    """Accuracy and achieved-rate ratio versus measured beam count b."""
    levels = list(range(1, report.n_beams + 1))
    fig, ax = _new_axes("measured beams b", "metric")
    ax.plot(levels, report.beam_accuracy_curve, marker="o", label="beam accuracy")
    ax.plot(levels, report.total_accuracy_curve, marker="s", label="total accuracy")
    ax.plot(levels, report.rate_ratio_curve, marker="^", label="rate ratio")
    ax.axhline(report.bs_accuracy, color="gray", linestyle=":",
               label="BS accuracy")
    ax.set_ylim(0.0, 1.02)
    ax.legend(loc="lower right")
    _save(fig, path)
