"""Selection metrics and the delimited evaluation report.

Beam accuracy at level b asks whether the oracle beam (argmax of the
sample's target vector, which lives on the oracle-best station) appears
among the b highest predicted beam rates; it is measured regardless of
whether the station decision was right. Total accuracy requires both a
correct station and a beam hit. The achieved-rate ratio compares the
best true rate among the predicted top-b beams against the oracle rate;
a wrong station decision scores zero for that sample since its rates
live on another station.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .model import Model, forward, predict_from_output

REPORT_FORMAT = "beamsel-eval-report"
REPORT_VERSION = 1


@dataclass
class EvalReport:
    """Accuracy curves over b = 1..n_beams plus scalars at the chosen b."""

    n_samples: int
    n_beams: int
    b: int
    bs_accuracy: float
    beam_accuracy_curve: np.ndarray   # (n_beams,) monotone non-decreasing
    total_accuracy_curve: np.ndarray  # (n_beams,)
    rate_ratio_curve: np.ndarray      # (n_beams,)
    config_hash: str = ""

    @property
    def beam_accuracy(self) -> float:
        return float(self.beam_accuracy_curve[self.b - 1])

    @property
    def total_accuracy(self) -> float:
        return float(self.total_accuracy_curve[self.b - 1])

    @property
    def rate_ratio(self) -> float:
        return float(self.rate_ratio_curve[self.b - 1])

    @property
    def latency_ratio(self) -> float:
        return latency_ratio(self.b, self.n_beams)


def latency_ratio(b: int, n_beams: int) -> float:
    """Fraction of beam measurements versus exhaustive search: b / M."""
    if not 1 <= b <= n_beams:
        raise ValueError(f"b={b} outside 1..{n_beams}")
    return b / n_beams


def evaluate(model: Model, samples, b: int = 1, config_hash: str = "") -> EvalReport:
    """Run the model over ``samples`` and aggregate selection metrics."""
    samples = list(samples)
    if not samples:
        raise ValueError("evaluate needs at least one sample")
    n_beams = model.config.n_beams
    if not 1 <= b <= n_beams:
        raise ValueError(f"b={b} outside 1..{n_beams}")

    x = np.stack([s.features for s in samples])
    bs_labels = np.array([s.bs_label for s in samples])
    targets = np.stack([s.target for s in samples])
    oracle_beams = np.argmax(targets, axis=1)

    output, _ = forward(model, x)
    pred_bs, _ = predict_from_output(output, 1)
    ranking = np.argsort(-output.beam_rates, axis=1, kind="stable")

    n = len(samples)
    # Rank of the oracle beam inside each sample's predicted ordering.
    oracle_rank = np.argmax(ranking == oracle_beams[:, None], axis=1)
    bs_correct = pred_bs == bs_labels

    levels = np.arange(1, n_beams + 1)
    hit = oracle_rank[:, None] < levels[None, :]            # (n, M)
    beam_curve = hit.mean(axis=0)
    total_curve = (hit & bs_correct[:, None]).mean(axis=0)

    # Best true (normalized) rate among the predicted top-b beams; the
    # target vector is normalized by the oracle rate, so this IS the
    # achieved-rate ratio. Wrong station -> 0.
    picked = np.take_along_axis(targets, ranking, axis=1)   # (n, M)
    best_so_far = np.maximum.accumulate(picked, axis=1)
    ratio_curve = (best_so_far * bs_correct[:, None]).mean(axis=0)

    return EvalReport(
        n_samples=n,
        n_beams=n_beams,
        b=b,
        bs_accuracy=float(bs_correct.mean()),
        beam_accuracy_curve=beam_curve,
        total_accuracy_curve=total_curve,
        rate_ratio_curve=ratio_curve,
        config_hash=config_hash,
    )


def bs_conditioned_beam_accuracy(model: Model, samples, b: int = 1) -> float:
    """Beam accuracy at level b among samples whose station was correct."""
    samples = list(samples)
    report = evaluate(model, samples, b)
    x = np.stack([s.features for s in samples])
    bs_labels = np.array([s.bs_label for s in samples])
    targets = np.stack([s.target for s in samples])
    output, _ = forward(model, x)
    pred_bs, beams = predict_from_output(output, b)
    mask = pred_bs == bs_labels
    if not mask.any():
        return math.nan
    oracle = np.argmax(targets, axis=1)
    hits = (beams == oracle[:, None]).any(axis=1)
    return float(hits[mask].mean())


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

_COLUMNS = ("row", "b", "bs_accuracy", "beam_accuracy", "total_accuracy",
            "rate_ratio", "latency_ratio")


def emit_report(report: EvalReport, path) -> None:
    """Write the report: one row per b level plus a summary row."""
    lines = [
        f"# {REPORT_FORMAT} v{REPORT_VERSION}",
        f"# config_hash={report.config_hash}",
        f"# n_samples={report.n_samples}",
        f"# n_beams={report.n_beams}",
        ",".join(_COLUMNS),
    ]
    for i in range(report.n_beams):
        level = i + 1
        lines.append(",".join([
            "level", str(level), repr(report.bs_accuracy),
            repr(float(report.beam_accuracy_curve[i])),
            repr(float(report.total_accuracy_curve[i])),
            repr(float(report.rate_ratio_curve[i])),
            repr(latency_ratio(level, report.n_beams)),
        ]))
    lines.append(",".join([
        "summary", str(report.b), repr(report.bs_accuracy),
        repr(report.beam_accuracy), repr(report.total_accuracy),
        repr(report.rate_ratio), repr(report.latency_ratio),
    ]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def parse_report(path) -> EvalReport:
    """Read a report written by :func:`emit_report` (exact round trip)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read report {path}: {exc}") from exc
    if not lines or not lines[0].startswith(f"# {REPORT_FORMAT} v"):
        raise DataFormatError(f"{path}: not an evaluation report")
    version = lines[0].removeprefix(f"# {REPORT_FORMAT} v").strip()
    if version != str(REPORT_VERSION):
        raise DataFormatError(f"{path}: unsupported report version {version}")
    meta = {}
    idx = 1
    while idx < len(lines) and lines[idx].startswith("#"):
        key, value = lines[idx][1:].strip().split("=", 1)
        meta[key] = value
        idx += 1
    if idx >= len(lines) or lines[idx].split(",") != list(_COLUMNS):
        raise DataFormatError(f"{path}: bad column header")
    idx += 1
    n_beams = int(meta["n_beams"])
    beam = np.zeros(n_beams)
    total = np.zeros(n_beams)
    ratio = np.zeros(n_beams)
    bs_acc = 0.0
    summary_b = None
    seen_levels = 0
    for line in lines[idx:]:
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(_COLUMNS):
            raise DataFormatError(f"{path}: malformed row {line!r}")
        if parts[0] == "level":
            lvl = int(parts[1])
            beam[lvl - 1] = float(parts[3])
            total[lvl - 1] = float(parts[4])
            ratio[lvl - 1] = float(parts[5])
            bs_acc = float(parts[2])
            seen_levels += 1
        elif parts[0] == "summary":
            summary_b = int(parts[1])
        else:
            raise DataFormatError(f"{path}: unknown row kind {parts[0]!r}")
    if seen_levels != n_beams or summary_b is None:
        raise DataFormatError(f"{path}: expected {n_beams} level rows and a summary")
    return EvalReport(
        n_samples=int(meta["n_samples"]),
        n_beams=n_beams,
        b=summary_b,
        bs_accuracy=bs_acc,
        beam_accuracy_curve=beam,
        total_accuracy_curve=total,
        rate_ratio_curve=ratio,
        config_hash=meta.get("config_hash", ""),
    )


def diagnostics_rows(model: Model, samples, b: int) -> list[dict]:
    """Per-sample dump for offline analysis (optional CLI output)."""
    samples = list(samples)
    x = np.stack([s.features for s in samples])
    targets = np.stack([s.target for s in samples])
    output, _ = forward(model, x)
    pred_bs, beams = predict_from_output(output, b)
    oracle = np.argmax(targets, axis=1)
    rows = []
    for i, s in enumerate(samples):
        rows.append({
            "user_id": s.user_id,
            "pos_x": s.position[0], "pos_y": s.position[1],
            "bs_label": s.bs_label, "bs_pred": int(pred_bs[i]),
            "beam_label": int(oracle[i]),
            "beams_pred": " ".join(str(int(v)) for v in beams[i]),
            "hit": int(oracle[i] in beams[i]),
        })
    return rows
