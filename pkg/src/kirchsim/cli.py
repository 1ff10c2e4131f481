"""Command-line entry point.

    kirchsim <experiment> --config scenario.json [--out DIR] [--seed N]
             [--tol X] [--format csv|json]

Experiments: lsc, age, growth, verify, simulate.  The exit code is 0 iff
every verdict passes.  See the README for the config schema.
"""
from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENTS, load_config
from .errors import ConfigError, KirchsimError
from .experiments import RUNNERS, run_simulate


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kirchsim",
        description="Spectral simulator and verification harness for "
                    "Kirchhoff-type wave equations.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="JSON scenario file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--tol", type=float, default=None, help="override solver.tol")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="output format")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, experiment=args.experiment,
                          overrides={"seed": args.seed, "tol": args.tol})
        if args.experiment == "simulate":
            result = run_simulate(cfg, out_dir=args.out, fmt=args.format)
        else:
            result = RUNNERS[args.experiment](cfg)
    except (ConfigError, KirchsimError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    path = result.write(args.out, fmt=args.format)
    ledger = result.metadata.get("constants_ledger")
    if ledger:
        width = max(len(row["name"]) for row in ledger)
        print("constants ledger:")
        for row in ledger:
            print(f"  {row['name']:<{width}}  {row['value']:<24.17g}  {row['formula']}")
    for name in sorted(result.verdicts):
        status = "PASS" if result.verdicts[name] else "FAIL"
        print(f"{status} {name}")
    print(f"wrote {path}")
    return 0 if result.all_pass() else 1


if __name__ == "__main__":
    sys.exit(main())
