"""Command-line front end.

Subcommands: train, fidelity, threshold, inspect.  Configs are TOML; two
packaged presets exist (`--preset desk` for quick runs and CI, `--preset
paper` for the full-scale sweeps).  Worker count comes from --workers or
the QVL_WORKERS environment variable and never changes results.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .circuit import build_bare_vqc, serialize_program
from .experiments import (ConfigError, load_config, resolve_workers,
                          run_fidelity_command, run_threshold_command,
                          run_train_command)
from .vqc import build_logical_vqc


def _config_path(args) -> Path:
    if args.config:
        return Path(args.config)
    if args.preset:
        ref = resources.files("qvl").joinpath(f"presets/{args.preset}.toml")
        with resources.as_file(ref) as path:
            return Path(path)
    raise ConfigError("either --config PATH or --preset {desk,paper} is required")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML experiment config")
    parser.add_argument("--preset", choices=("desk", "paper"),
                        help="packaged config preset")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: QVL_WORKERS or CPUs)")
    parser.add_argument("--seed-offset", type=int, default=0,
                        help="added to every configured seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qvl",
        description="Train and analyse the error-detected parity classifier.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the training grid")
    _add_common(p_train)

    p_fid = sub.add_parser("fidelity", help="run fidelity campaigns")
    _add_common(p_fid)

    p_thr = sub.add_parser("threshold",
                           help="estimate thresholds from sweep CSVs")
    p_thr.add_argument("--sweep", required=True,
                       help="directory containing train_summary.csv (and "
                            "optionally fidelity_summary.csv)")
    p_thr.add_argument("--out", default="results")
    p_thr.add_argument("--config", help="TOML config for threshold settings")
    p_thr.add_argument("--preset", choices=("desk", "paper"))
    p_thr.add_argument("--seed-offset", type=int, default=0)

    p_ins = sub.add_parser("inspect", help="pretty-print a circuit program")
    p_ins.add_argument("--kind", choices=("bare", "logical"), default="logical")
    p_ins.add_argument("--input", default="00",
                       help="two input bits, e.g. 01")
    p_ins.add_argument("--theta", type=float, required=True)
    p_ins.add_argument("--rounds", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "inspect":
            bits = tuple(int(b) for b in args.input)
            if len(bits) != 2 or any(b not in (0, 1) for b in bits):
                raise ConfigError(f"--input must be two bits, got {args.input!r}")
            if args.kind == "bare":
                program = build_bare_vqc(bits, args.theta)
            else:
                program = build_logical_vqc(bits, args.theta, args.rounds).program
            sys.stdout.write(serialize_program(program))
            return 0

        if args.command == "threshold":
            sweep = Path(args.sweep)
            train_summary = sweep / "train_summary.csv"
            if not train_summary.exists():
                raise ConfigError(f"{train_summary} does not exist")
            fidelity_summary = sweep / "fidelity_summary.csv"
            kwargs = {}
            if args.config or args.preset:
                config = load_config(_config_path(args), args.seed_offset)
                kwargs = dict(
                    accuracy_floor=config.threshold_accuracy_floor,
                    std_ceiling=config.threshold_std_ceiling,
                    fidelity_rounds=config.threshold_fidelity_rounds)
            path = run_threshold_command(
                train_summary,
                fidelity_summary if fidelity_summary.exists() else None,
                args.out, **kwargs)
            print(f"wrote {path}")
            return 0

        config = load_config(_config_path(args), args.seed_offset)
        workers = resolve_workers(args.workers)
        if args.command == "train":
            path = run_train_command(config, args.out, workers)
        else:
            path = run_fidelity_command(config, args.out, workers)
        print(f"wrote {path}")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
