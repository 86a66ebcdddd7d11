"""Command-line entry points.

Exit codes: 0 success, 1 validation failure, 2 numerical failure,
3 acceptance-check failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .fractal import box_count, estimate_dimension, extract_level_set
from .galerkin import InstabilityError, UnsupportedRegimeError
from .harness import (
    ExperimentConfig,
    calibrate_estimator,
    load_config,
    run_comparison,
    run_linear_experiment,
    run_nonlinear_experiment,
    verify_lemmas,
)
from .io import read_grid, write_csv

MEDIAN_GAP_LIMIT = 0.1  # linear-vs-nonlinear acceptance gap on median slopes


def _experiment_flags(sub):
    sub.add_argument("--config", type=Path, help="flat section.key = value config file")
    sub.add_argument("--seed", type=int, help="master seed (overrides config)")
    sub.add_argument("--replicas", type=int, help="ensemble size (overrides config)")
    sub.add_argument("--workers", type=int, help="parallel workers (overrides config)")
    sub.add_argument("--out", type=Path, help="output directory (overrides config)")
    sub.add_argument(
        "--unsupported-regime",
        action="store_true",
        help="run outside the supported parameter regime without correctness claims",
    )


def _build_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.replicas is not None:
        updates["ensemble_size"] = args.replicas
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.out is not None:
        updates["out_dir"] = str(args.out)
    if getattr(args, "disable_nonlinearity", False):
        updates["nonlinearity"] = False
    return replace(cfg, **updates) if updates else cfg


def _cmd_sample_linear(args) -> int:
    cfg = _build_config(args)
    manifest = run_linear_experiment(cfg, unsupported_regime=args.unsupported_regime)
    print(f"linear experiment: {cfg.ensemble_size} replicas -> {manifest.out_dir}")
    return 0


def _cmd_solve_nonlinear(args) -> int:
    cfg = _build_config(args)
    manifest = run_nonlinear_experiment(cfg, unsupported_regime=args.unsupported_regime)
    print(f"nonlinear experiment: {cfg.ensemble_size} replicas -> {manifest.out_dir}")
    return 0


def _cmd_dimension(args) -> int:
    g = read_grid(args.grid)
    ls = extract_level_set(g, args.level)
    if ls.is_empty:
        print(f"level set at y={args.level} is empty")
        return 3
    curve = box_count(ls)
    est = estimate_dimension(curve)
    for k, c in zip(curve.ks, curve.counts):
        print(f"k={k}  N_k={c}")
    print(
        f"dimension estimate: {est.dimension:.4f} +- {est.stderr:.4f} "
        f"(window {est.window[0]}:{est.window[1]})"
    )
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_csv(
            args.out / "boxcount.csv",
            ["replica", "y", "k", "N_k"],
            [(0, args.level, int(k), int(c)) for k, c in zip(curve.ks, curve.counts)],
        )
        write_csv(
            args.out / "dimension.csv",
            ["replica", "y", "slope", "stderr", "window"],
            [(0, args.level, est.dimension, est.stderr, f"{est.window[0]}:{est.window[1]}")],
        )
        print(f"wrote boxcount.csv and dimension.csv -> {args.out}")
    return 0


def _cmd_verify_lemmas(args) -> int:
    cfg = _build_config(args)
    rows, all_pass = verify_lemmas(cfg, unsupported_regime=args.unsupported_regime)
    for lemma, check, measured, threshold, status in rows:
        print(f"[{status:>4}] {lemma}.{check}: {measured} (threshold {threshold})")
    print(f"lemma report -> {cfg.out_dir}/lemma_report.csv")
    return 0 if all_pass else 3


def _cmd_compare(args) -> int:
    cfg = _build_config(args)
    run_comparison(
        cfg,
        linear_dir=args.linear,
        nonlinear_dir=args.nonlinear,
        unsupported_regime=args.unsupported_regime,
    )
    import csv

    gap = None
    with open(Path(cfg.out_dir) / "comparison.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            print(f"{row['statistic']} [{row['subset']}]: {row['value']}")
            if row["statistic"] == "abs_median_difference":
                gap = float(row["value"])
    if gap is None or gap > MEDIAN_GAP_LIMIT:
        print(f"median gap {gap} exceeds {MEDIAN_GAP_LIMIT}", file=sys.stderr)
        return 3
    return 0


def _cmd_calibrate(args) -> int:
    out = args.out if args.out is not None else Path("runs/calibration")
    rows, all_pass = calibrate_estimator(out, resolution=args.resolution)
    for name, target, estimate, error, status in rows:
        print(f"[{status:>4}] {name}: estimate {estimate:.4f} target {target:.4f} (error {error:+.4f})")
    print(f"calibration report -> {out}/calibration.csv")
    return 0 if all_pass else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="levelset-lab",
        description="Spectral simulation and level-set fractal analysis on the 2-D torus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-linear", help="exact linear ensemble + level-set analysis")
    _experiment_flags(p)
    p.set_defaults(handler=_cmd_sample_linear)

    p = sub.add_parser("solve-nonlinear", help="truncated nonlinear ensemble + analysis")
    _experiment_flags(p)
    p.add_argument(
        "--disable-nonlinearity",
        action="store_true",
        help="drop the advection term (degenerates to the exact linear march)",
    )
    p.set_defaults(handler=_cmd_solve_nonlinear)

    p = sub.add_parser("dimension", help="box-count dimension of a stored grid field")
    p.add_argument("grid", type=Path, help="grid field file")
    p.add_argument("--level", type=float, default=0.0, help="level y (default 0)")
    p.add_argument("--out", type=Path, help="also write boxcount/dimension CSVs here")
    p.set_defaults(handler=_cmd_dimension)

    p = sub.add_parser("verify-lemmas", help="measure the supporting lemmas")
    _experiment_flags(p)
    p.set_defaults(handler=_cmd_verify_lemmas)

    p = sub.add_parser("compare", help="linear vs nonlinear slope distributions")
    _experiment_flags(p)
    p.add_argument("--linear", type=Path, help="directory with linear outputs")
    p.add_argument("--nonlinear", type=Path, help="directory with nonlinear outputs")
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("calibrate-estimator", help="dimension estimator on known sets")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--resolution", type=int, default=256, help="grid resolution")
    p.set_defaults(handler=_cmd_calibrate)

    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (UnsupportedRegimeError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (InstabilityError, ArithmeticError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
