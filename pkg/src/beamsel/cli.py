"""Command-line interface.

One binary, five subcommands: generate, train, eval, sweep, gradcheck.
Exit codes: 0 on success, 2 for configuration problems, 3 for data file
problems, 4 for numerical failures. Set BEAMSEL_THREADS to cap BLAS
threading (must happen before numpy loads, hence the deferred imports).

Every delimited output is rendered to a figure next to it: history.csv
gets history.png, sweep.csv gets sweep.png, report CSVs share
beam_levels.png.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _configure_threads() -> None:
    threads = os.environ.get("BEAMSEL_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamsel",
        description="mmWave station and beam selection from sub-6GHz features",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--preset", default="desk", choices=("desk", "full"),
                       help="built-in parameter set (default: desk)")
        p.add_argument("--config", type=Path, default=None,
                       help="JSON file overlaid on the preset")
        p.add_argument("--seed", type=int, default=None,
                       help="override the run seed")
        p.add_argument("--out", type=Path, default=Path("."),
                       help="output directory (default: current)")

    p = sub.add_parser("generate", help="build the labeled dataset")
    common(p)
    p.add_argument("--channels-out", type=Path, default=None,
                   help="also store the raw mmWave channel set here")

    p = sub.add_parser("train", help="train the selection network")
    common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--checkpoint-every", type=int, default=0, metavar="N",
                   help="write model_epoch{N}.ckpt snapshots every N epochs")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--split", type=Path, default=None,
                   help="split file; only its test indices are evaluated")
    p.add_argument("--beams", default="1,3",
                   help="comma-separated b levels to summarize (default 1,3)")
    p.add_argument("--diagnostics", action="store_true",
                   help="also dump per-sample decisions")
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("sweep", help="accuracy versus training-data fraction")
    common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--fractions", default="0.25,0.5,0.75,1.0",
                   help="comma-separated fractions in (0, 1]")

    p = sub.add_parser("gradcheck", help="verify analytic gradients")
    common(p)
    p.add_argument("--samples", type=int, default=10,
                   help="random samples in the check batch (default 10)")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)

    return parser


def _parse_int_list(text: str, what: str) -> list[int]:
    from .errors import ConfigurationError
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad {what} list {text!r}") from exc
    if not values:
        raise ConfigurationError(f"empty {what} list")
    return values


def _parse_float_list(text: str, what: str) -> list[float]:
    from .errors import ConfigurationError
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad {what} list {text!r}") from exc
    if not values:
        raise ConfigurationError(f"empty {what} list")
    return values


def _load_config(args):
    from .config import load_run_config
    return load_run_config(preset=args.preset, config_path=args.config,
                           seed=args.seed)


def _check_dataset_matches(cfg, ds, path) -> None:
    from .errors import ConfigurationError
    pairs = (("n_sub6_bs", cfg.scene.n_sub6_bs),
             ("n_mmw_bs", cfg.scene.n_mmw_bs),
             ("n_beams", cfg.n_beams))
    for key, expected in pairs:
        if int(ds.meta[key]) != expected:
            raise ConfigurationError(
                f"{path}: dataset has {key}={ds.meta[key]}, config expects "
                f"{expected}"
            )


def cmd_generate(args) -> int:
    from . import pipeline
    from .channel import save_channels
    from .dataset import save_dataset
    from .scene import export_scene

    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    result = pipeline.generate(cfg)
    save_dataset(result.dataset, args.out / "dataset.csv")
    export_scene(result.scene, args.out / "scene.txt")
    log_lines = [f"config_hash={cfg.hash}"] + result.log_lines
    (args.out / "generate.log").write_text("\n".join(log_lines) + "\n",
                                           encoding="utf-8")
    if args.channels_out is not None:
        mmw_paths = None  # recompute inside helper for simplicity
        from .channel import path_from_geometry
        mmw_paths = [[path_from_geometry(bs, user, cfg.mmw_band, result.scene)
                      for user in result.scene.users]
                     for bs in result.scene.mmw]
        save_channels(pipeline.mmw_channel_set(cfg, result.scene, mmw_paths),
                      args.channels_out)
    print(f"dataset: {len(result.dataset)} samples "
          f"({len(result.excluded_users)} users excluded) -> "
          f"{args.out / 'dataset.csv'}")
    return EXIT_OK


def cmd_train(args) -> int:
    import numpy as np

    from .dataset import load_dataset, save_split
    from .features import fit_normalizer, normalize_sample
    from .figures import plot_history
    from .model import init_model, save_model
    from .train import save_history, split_dataset, train

    cfg = _load_config(args)
    ds = load_dataset(args.dataset)
    _check_dataset_matches(cfg, ds, args.dataset)
    args.out.mkdir(parents=True, exist_ok=True)

    train_idx, test_idx = split_dataset(ds.samples, cfg.train.split_ratio,
                                        cfg.train.rng_seed)
    stats = fit_normalizer(ds.samples[i] for i in train_idx)
    normalized = [normalize_sample(s, stats) for s in ds.samples]

    model = init_model(cfg.model)
    model.norm_stats = stats

    checkpoint_every = args.checkpoint_every
    if checkpoint_every and checkpoint_every > 0:
        # Train in legs so snapshots land between epochs.
        from dataclasses import replace
        from .train import History
        done = 0
        history = History(config_hash=cfg.hash)
        remaining = cfg.train.epochs
        while remaining > 0:
            leg = min(checkpoint_every, remaining)
            leg_cfg = replace(cfg.train, epochs=leg,
                              rng_seed=cfg.train.rng_seed + done)
            model, leg_hist = train(model, normalized, leg_cfg,
                                    train_idx, test_idx, cfg.hash)
            for row in leg_hist.rows:
                row.epoch += done
            history.rows.extend(leg_hist.rows)
            done += leg
            remaining -= leg
            save_model(model, args.out / f"model_epoch{done}.ckpt", cfg.hash)
    else:
        model, history = train(model, normalized, cfg.train,
                               train_idx, test_idx, cfg.hash)

    save_model(model, args.out / "model.ckpt", cfg.hash)
    save_history(history, args.out / "history.csv")
    plot_history(history, args.out / "history.png")
    save_split(args.out / "split.json", train_idx, test_idx,
               cfg.train.rng_seed, cfg.train.split_ratio)
    final = history.final()
    print(f"trained {cfg.train.epochs} epochs: bs={final.bs_accuracy:.3f} "
          f"top1={final.beam_top1:.3f} top3={final.beam_top3:.3f} "
          f"total={final.total_accuracy:.3f} -> {args.out / 'model.ckpt'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .dataset import load_dataset, load_split
    from .errors import ConfigurationError
    from .evaluation import diagnostics_rows, emit_report, evaluate
    from .features import normalize_sample
    from .figures import plot_beam_levels
    from .model import load_model

    model, stored_hash = load_model(args.checkpoint)
    ds = load_dataset(args.dataset)
    if (int(ds.meta["n_sub6_bs"]) != model.config.n_sub6_bs
            or int(ds.meta["n_beams"]) != model.config.n_beams):
        raise ConfigurationError(
            f"{args.dataset}: dataset sizes disagree with the checkpoint"
        )
    samples = ds.samples
    if args.split is not None:
        _, test_idx = load_split(args.split)
        samples = [ds.samples[i] for i in test_idx]
    if model.norm_stats is not None:
        samples = [normalize_sample(s, model.norm_stats) for s in samples]

    levels = _parse_int_list(args.beams, "beams")
    args.out.mkdir(parents=True, exist_ok=True)
    report = None
    for b in levels:
        report = evaluate(model, samples, b=b, config_hash=stored_hash)
        emit_report(report, args.out / f"report_b{b}.csv")
        print(f"b={b}: bs={report.bs_accuracy:.3f} "
              f"beam={report.beam_accuracy:.3f} "
              f"total={report.total_accuracy:.3f} "
              f"rate_ratio={report.rate_ratio:.3f} "
              f"latency={report.latency_ratio:.4f}")
    plot_beam_levels(report, args.out / "beam_levels.png")
    if args.diagnostics:
        rows = diagnostics_rows(model, samples, max(levels))
        header = ",".join(rows[0].keys())
        body = "\n".join(",".join(str(v) for v in r.values()) for r in rows)
        (args.out / "diagnostics.csv").write_text(
            f"# beamsel-diagnostics v1\n# config_hash={stored_hash}\n"
            f"{header}\n{body}\n", encoding="utf-8")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .dataset import load_dataset
    from .features import fit_normalizer, normalize_sample
    from .figures import plot_sweep
    from .train import ratio_sweep, save_sweep, split_dataset

    cfg = _load_config(args)
    ds = load_dataset(args.dataset)
    _check_dataset_matches(cfg, ds, args.dataset)
    fractions = _parse_float_list(args.fractions, "fractions")
    args.out.mkdir(parents=True, exist_ok=True)

    train_idx, test_idx = split_dataset(ds.samples, cfg.train.split_ratio,
                                        cfg.train.rng_seed)
    stats = fit_normalizer(ds.samples[i] for i in train_idx)
    normalized = [normalize_sample(s, stats) for s in ds.samples]

    rows = ratio_sweep(cfg.model, normalized, fractions, cfg.train,
                       train_idx, test_idx, cfg.hash)
    save_sweep(rows, args.out / "sweep.csv", cfg.hash)
    plot_sweep(rows, args.out / "sweep.png")
    for r in rows:
        print(f"fraction={r.fraction:g} n={r.n_train}: bs={r.bs_accuracy:.3f} "
              f"top1={r.beam_top1:.3f} top3={r.beam_top3:.3f} "
              f"total={r.total_accuracy:.3f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    import numpy as np

    from .model import gradient_check, init_model

    cfg = _load_config(args)
    rng = np.random.default_rng(cfg.seed + 3)
    model = init_model(cfg.model)
    n = max(1, args.samples)
    x = rng.uniform(0.0, 1.0, size=(n, cfg.model.n_sub6_bs,
                                    cfg.model.n_features))
    labels = rng.integers(0, cfg.model.n_mmw_bs, size=n)
    targets = rng.uniform(0.0, 1.0, size=(n, cfg.model.n_beams))
    targets[np.arange(n), rng.integers(0, cfg.model.n_beams, size=n)] = 1.0

    report = gradient_check(model, x, labels, targets, eps=args.eps)
    worst = max(report.values())
    lines = [f"# beamsel-gradcheck v1",
             f"# config_hash={cfg.hash}",
             f"# samples={n} eps={args.eps!r} tolerance={args.tolerance!r}"]
    for name in sorted(report):
        lines.append(f"{name}: max_rel_err={report[name]:.3e}")
    verdict = "PASS" if worst <= args.tolerance else "FAIL"
    lines.append(f"{verdict}: worst {worst:.3e} vs tolerance {args.tolerance:g}")
    text = "\n".join(lines)
    print(text)
    if args.out != Path("."):
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "gradcheck.txt").write_text(text + "\n", encoding="utf-8")
    if worst > args.tolerance:
        from .errors import NumericalError
        raise NumericalError(f"gradient check failed: {worst:.3e} > "
                             f"{args.tolerance:g}")
    return EXIT_OK


def main(argv=None) -> int:
    _configure_threads()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)

    from .errors import ConfigurationError, DataFormatError, NumericalError

    handlers = {
        "generate": cmd_generate,
        "train": cmd_train,
        "eval": cmd_eval,
        "sweep": cmd_sweep,
        "gradcheck": cmd_gradcheck,
    }
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
