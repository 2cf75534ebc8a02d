"""Command-line harness.

Subcommands: suite, gauss, qmc, mc, fdcheck, constants. Each takes
--config <path> and --out <dir>; --seed overrides the configured seed.
Exit codes: 0 success, 2 configuration/validation failure, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .harness import ConfigError, SweepError
from .regularity import theory_constants
from .solver import DivergenceError

_SUBCOMMAND_EXPERIMENT = {
    "gauss": "gauss-sweep",
    "qmc": "qmc-sweep",
    "mc": "mc-sweep",
    "fdcheck": "derivative-check",
    "suite": "suite",
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gevreyrd",
        description="Convergence benchmarks and derivative-bound checks for "
        "parametric semilinear reaction-diffusion problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("suite", "run the exact-arithmetic identity/inequality suite"),
        ("gauss", "one-parameter Gauss-Legendre convergence sweep"),
        ("qmc", "high-dimensional shifted-lattice convergence sweep"),
        ("mc", "high-dimensional Monte Carlo convergence sweep"),
        ("fdcheck", "finite-difference checks of the derivative bounds"),
        ("constants", "print the explicit constant chain for a problem"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON experiment config (defaults per subcommand)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (overrides config output_dir)")
        p.add_argument("--seed", type=int, default=None, help="override the seed")
        if name == "suite":
            p.add_argument("--depth", choices=("quick", "full"), default=None)
    return parser


def _load(args, command: str) -> harness.ExperimentConfig:
    if args.config is not None:
        cfg = harness.load_config(args.config)
        expected = _SUBCOMMAND_EXPERIMENT.get(command)
        if expected and cfg.experiment != expected:
            raise ConfigError(
                f"config is for experiment {cfg.experiment!r}, but the "
                f"{command!r} subcommand runs {expected!r}"
            )
    else:
        experiment = _SUBCOMMAND_EXPERIMENT.get(command, "gauss-sweep")
        cfg = harness.config_from_dict({"experiment": experiment})
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = str(args.out)
    if command == "suite" and getattr(args, "depth", None):
        cfg.suite_depth = args.depth
    return cfg


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "constants":
            return _cmd_constants(args)
        if args.command == "suite":
            return _cmd_suite(args)
        return _cmd_sweep(args)
    except (ConfigError, DegenerateArgs) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SweepError, DivergenceError, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


class DegenerateArgs(Exception):
    pass


def _cmd_constants(args) -> int:
    cfg = _load(args, "constants")
    spec = harness.build_problem(cfg)
    bundle = theory_constants(spec)
    payload = json.dumps(bundle.to_dict(), indent=2, sort_keys=True)
    if args.out is not None:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "constants.json").write_text(payload + "\n")
        print(f"wrote {outdir / 'constants.json'}")
    print(payload)
    return EXIT_OK


def _cmd_suite(args) -> int:
    cfg = _load(args, "suite")
    report = harness.run_sweep(cfg)
    print(
        f"suite[{report.depth}]: {report.checks_passed} passed, "
        f"{report.checks_failed} failed ({report.elapsed_s:.2f}s)"
    )
    if report.first_failure:
        print(f"first counterexample: {report.first_failure}")
    if args.out is not None:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "suite.json").write_text(json.dumps({
            "depth": report.depth,
            "checks_passed": report.checks_passed,
            "checks_failed": report.checks_failed,
            "first_failure": report.first_failure,
            "elapsed_s": report.elapsed_s,
        }, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if report.ok else EXIT_NUMERICAL


def _cmd_sweep(args) -> int:
    cfg = _load(args, args.command)
    result = harness.run_sweep(cfg)
    files = harness.write_outputs(result, cfg.output_dir)
    for name, path in sorted(files.items()):
        print(f"wrote {path}")
    if result.reports is not None:
        passed = sum(r.passed for r in result.reports)
        total = len(result.reports)
        worst = max(r.ratio for r in result.reports)
        print(f"bound checks: {passed}/{total} passed, worst ratio {worst:.3e}")
        if passed < total:
            return EXIT_NUMERICAL
    elif result.fit is not None:
        f = result.fit
        print(f"fit[{f.model}]: slope {f.slope:.4f}, r^2 {f.r_squared:.4f} "
              f"over n={f.n_used}")
    else:
        print("fit omitted (too few rows above the noise floor)")
    return EXIT_OK
