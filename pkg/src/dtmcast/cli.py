"""Command-line front end.

Subcommands: fit-surface, train, eval, sweep, oracle, simulate.
Exit codes: 0 ok, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv as csv_mod
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .dtmodels import fit_surface
from .domain import ScenarioError
from .harness import (ALGORITHMS, ExperimentPlan, PlanError, compare_oracle,
                      run, sweep)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _parse_grid(text: str | None) -> list[float]:
    if not text:
        return []
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="YAML configuration file (defaults used if omitted)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--episodes", type=int, default=None)
    parser.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtmcast",
        description="Digital-twin multicast streaming simulator and "
                    "resource-management toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-surface",
                       help="fit the quadratic accuracy surface to a CSV of "
                            "(m, psi, acc) samples")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None,
                   help="also write the fit report to this file")

    p = sub.add_parser("train", help="train one algorithm and evaluate it")
    _add_common(p)
    p.add_argument("--algo", choices=ALGORITHMS, default="dftd3")
    p.add_argument("--eval-windows", type=int, default=20)

    p = sub.add_parser("eval", help="greedy evaluation only (trains learning "
                                    "algorithms first at the configured budget)")
    _add_common(p)
    p.add_argument("--algo", choices=ALGORITHMS, default="equal-split")
    p.add_argument("--eval-windows", type=int, default=20)

    p = sub.add_parser("sweep", help="latency vs. capacity sweeps")
    _add_common(p)
    p.add_argument("--algos", default="equal-split",
                   help="comma-separated algorithm list")
    p.add_argument("--bandwidth-grid", default=None,
                   help="comma-separated MHz values")
    p.add_argument("--compute-grid", default=None,
                   help="comma-separated Gcycles/s values")
    p.add_argument("--eval-windows", type=int, default=20)
    p.add_argument("--allow-out-of-range", action="store_true")

    p = sub.add_parser("oracle", help="compare policies to the brute-force "
                                      "window optimum")
    _add_common(p)
    p.add_argument("--algos", default="equal-split")
    p.add_argument("--eval-windows", type=int, default=10)
    p.add_argument("--grid-points", type=int, default=41)

    p = sub.add_parser("simulate", help="environment-only rollout with the "
                                        "equal-split heuristic")
    _add_common(p)
    p.add_argument("--eval-windows", type=int, default=20)
    return parser


def cmd_fit_surface(args) -> int:
    samples = []
    with open(args.input, newline="") as fh:
        reader = csv_mod.reader(fh)
        for row in reader:
            if not row or not row[0].strip():
                continue
            try:
                samples.append([float(v) for v in row[:3]])
            except ValueError:
                continue  # header or junk row
    surface, r2, rmse = fit_surface(np.asarray(samples))
    names = ("c0", "c_m", "c_psi", "c_mm", "c_mpsi", "c_psipsi")
    lines = [f"{n}: {c:.9g}" for n, c in zip(names, surface.coefficients)]
    lines.append(f"r_squared: {r2:.9g}")
    lines.append(f"rmse: {rmse:.9g}")
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(report)
    return EXIT_OK


def _plan_from_args(args, algorithms, **kwargs) -> ExperimentPlan:
    cfg = load_config(args.config)
    return ExperimentPlan(
        config=cfg,
        algorithms=algorithms,
        seeds=[args.seed],
        out_dir=args.out,
        episodes=args.episodes,
        verbose=args.verbose,
        **kwargs,
    )


def cmd_train(args) -> int:
    plan = _plan_from_args(args, [args.algo], eval_windows=args.eval_windows)
    outputs = run(plan)
    if args.verbose:
        for name in sorted(outputs):
            print(f"wrote {outputs[name]}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    plan = _plan_from_args(
        args, [a.strip() for a in args.algos.split(",") if a.strip()],
        bandwidth_grid=_parse_grid(args.bandwidth_grid),
        compute_grid=_parse_grid(args.compute_grid),
        eval_windows=args.eval_windows,
        allow_out_of_range=args.allow_out_of_range,
    )
    outputs = sweep(plan)
    if args.verbose:
        for name in sorted(outputs):
            print(f"wrote {outputs[name]}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    plan = _plan_from_args(
        args, [a.strip() for a in args.algos.split(",") if a.strip()],
        eval_windows=args.eval_windows,
        oracle_grid_points=args.grid_points,
    )
    report = compare_oracle(plan)
    for algo, stats in sorted(report["algorithms"].items()):
        print(f"{algo}: median ratio {stats['median_ratio']:.4f}, "
              f"max {stats['max_ratio']:.4f} over {stats['windows']} windows")
    return EXIT_OK


def cmd_simulate(args) -> int:
    plan = _plan_from_args(args, ["equal-split"],
                           eval_windows=args.eval_windows)
    outputs = run(plan)
    if args.verbose:
        for name in sorted(outputs):
            print(f"wrote {outputs[name]}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "fit-surface": cmd_fit_surface,
        "train": cmd_train,
        "eval": cmd_train,   # train subsumes eval for learning algorithms
        "sweep": cmd_sweep,
        "oracle": cmd_oracle,
        "simulate": cmd_simulate,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ScenarioError, PlanError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures map to a distinct exit code
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
