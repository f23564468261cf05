"""Command-line front end.

Subcommands mirror the experiment kinds; every run is fixed by the config
file plus the master seed.  Exit codes: 0 success, 2 configuration error,
3 numerical failure (including failed contraction checks).
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

import numpy as np

from .harness import (
    KINDS,
    ConfigError,
    ExperimentConfig,
    run_replications,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="siadmm",
        description="Stochastic inexact splitting experiments: comparisons, "
                    "contraction checks, certificates and complexity sweeps.",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="JSON experiment config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output directory for CSV/JSON files")
        p.add_argument("--replications", type=int, help="number of replications")
        p.add_argument("--budget", type=int, help="total sampled-gradient budget")
        p.add_argument("--n", type=int, help="instance dimension")
        p.add_argument("--gamma-bar", type=float, dest="gamma_bar",
                       help="l1 penalty weight of the regression instance")
        p.add_argument("--rho", type=float, help="penalty parameter")
        p.add_argument("--eta", type=float, help="geometric schedule ratio in (0,1)")
        p.add_argument("--T", type=float, dest="T", help="base inner batch size")
        p.add_argument("--Gamma", type=float, dest="Gamma",
                       help="ball-projection radius factor for the distributed baseline")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
        if cfg.kind != args.kind:
            raise ConfigError(
                f"config file is for kind {cfg.kind!r} but subcommand is {args.kind!r}")
    else:
        cfg = ExperimentConfig(kind=args.kind)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.replications is not None:
        if args.replications < 1:
            raise ConfigError("replications must be >= 1")
        cfg.replications = args.replications
    if args.budget is not None:
        cfg.budget = args.budget
    for name in ("n", "gamma_bar"):
        v = getattr(args, name)
        if v is not None:
            cfg.instance[name] = v
    for name in ("rho", "eta", "T", "Gamma"):
        v = getattr(args, name)
        if v is not None:
            cfg.options[name] = v
    return cfg


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help
        return int(e.code or 0)
    try:
        cfg = config_from_args(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        result = run_replications(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    print(json.dumps(result.summary, indent=2, sort_keys=True, default=str))
    if not result.all_passed:
        print("checks failed", file=sys.stderr)
        return 3
    return 0


def entry() -> None:  # console-script hook
    sys.exit(main())


if __name__ == "__main__":
    entry()
