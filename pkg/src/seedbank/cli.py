"""Command-line front end.

Subcommands map one-to-one onto the experiments; every run takes a JSON
config (optional, with built-in defaults per subcommand), a master seed and
a worker count, and writes paths.csv / summary.json / report.txt into the
output directory.  Exit status is 0 iff every registered check passed.

    seedbank check-duality --config cfg.json --seed 7 --workers 4 --out out/

Command-line flags override the config file.  Worker count never changes
any output byte (per-replicate counter-based streams; fixed reduction
order).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import ExperimentConfig, config_from_dict, run_experiment

SUBCOMMANDS = {
    "simulate-moran": "moran",
    "simulate-lookdown": "lookdown",
    "simulate-coalescent": "coalescent",
    "integrate-sde": "sde",
    "check-duality": "duality",
    "check-generators": "generator_conv",
    "check-fixation": "fixation_equiv",
}

_DEFAULT_PARAMS = {
    "reproduction": {"kingman_mass": 1.0, "atoms": [[0.4, 0.5]],
                     "kind": "reproduction"},
    "mutation": {"kingman_mass": 0.0, "atoms": [], "kind": "mutation"},
    "alpha": 1.0,
    "sigma": 1.0,
    "env_convention": "activity_matched",
}

DEFAULT_CONFIGS = {
    "moran": {
        "experiment": "moran", "params": _DEFAULT_PARAMS, "n_pop": 20,
        "replicates": 2000, "horizon": 1.0, "record": [0.5, 1.0],
        "master_seed": 1, "env0": 0,
    },
    "lookdown": {
        "experiment": "lookdown", "params": _DEFAULT_PARAMS, "n_pop": 20,
        "replicates": 2000, "horizon": 1.0, "record": [0.5, 1.0],
        "master_seed": 1, "env0": 0,
    },
    "coalescent": {
        "experiment": "coalescent", "params": _DEFAULT_PARAMS,
        "replicates": 2000, "horizon": 10.0, "master_seed": 1, "env0": 0,
        "extra": {"n_blocks": 5, "m_blocks": 0},
    },
    "sde": {
        "experiment": "sde", "params": _DEFAULT_PARAMS, "replicates": 10000,
        "horizon": 1.0, "record": [0.5, 1.0], "master_seed": 1, "env0": 0,
        "extra": {"system": "sdbk", "dt": 1e-3, "init_z": [0.25, 0.25, 0.5]},
    },
    "duality": {
        "experiment": "duality", "params": _DEFAULT_PARAMS, "n_pop": 20,
        "replicates": 20000, "master_seed": 1, "env0": 1,
        "extra": {"z": [0.25, 0.25, 0.5], "env_mode": "stationary",
                  "cells": [{"t": 0.5, "n": 1, "m": 0},
                            {"t": 0.5, "n": 2, "m": 0},
                            {"t": 1.0, "n": 1, "m": 1}]},
    },
    "generator_conv": {
        "experiment": "generator_conv", "params": _DEFAULT_PARAMS,
        "master_seed": 1,
        "extra": {"n_values": [100, 200], "z3": 0.5},
    },
    "fixation_equiv": {
        "experiment": "fixation_equiv",
        "params": {
            "reproduction": {"kingman_mass": 1.0, "atoms": [],
                             "kind": "reproduction"},
            "mutation": {"kingman_mass": 0.0, "atoms": [], "kind": "mutation"},
            "alpha": 1.0, "sigma": 1.0,
            "env_convention": "activity_matched",
        },
        "n_pop": 30, "replicates": 2000, "master_seed": 1, "env0": 1,
        "init": [15, 0, 15, 0],
        "extra": {"t_obs": 0.5, "reps_fixation": 2000, "reps_ks": 2000,
                  "demonstrate_convention_failure": True},
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seedbank",
        description="Seed-bank population-model simulators and checks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {SUBCOMMANDS[name]} experiment")
        p.add_argument("--config", type=Path, default=None,
                       help="JSON experiment config (defaults built in)")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed override (u64)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes; never affects results")
        p.add_argument("--out", type=Path, default=Path("out"),
                       help="output directory")
    return parser


def load_config(experiment: str, config_path: Path | None,
                seed: int | None) -> ExperimentConfig:
    obj = json.loads(json.dumps(DEFAULT_CONFIGS[experiment]))  # deep copy
    if config_path is not None:
        try:
            user = json.loads(config_path.read_text())
        except FileNotFoundError:
            raise SystemExit(f"config file not found: {config_path}")
        except json.JSONDecodeError as e:
            raise SystemExit(
                f"config parse error in {config_path} at line {e.lineno}, "
                f"column {e.colno}: {e.msg}")
        obj.update(user)
        obj["experiment"] = experiment
    if seed is not None:
        if not (0 <= seed < 2**64):
            raise SystemExit("--seed must fit in an unsigned 64-bit integer")
        obj["master_seed"] = seed
    try:
        return config_from_dict(obj)
    except (KeyError, ValueError) as e:
        raise SystemExit(f"invalid config: {e}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    experiment = SUBCOMMANDS[args.command]
    cfg = load_config(experiment, args.config, args.seed)
    if args.workers < 1:
        raise SystemExit("--workers must be >= 1")
    try:
        all_passed, summary = run_experiment(cfg, args.out, workers=args.workers)
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    for check in summary["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}: {check['detail']}")
    print(f"outputs written to {args.out}")
    return 0 if all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
