"""Command line entry point: run / validate / seeds."""
from __future__ import annotations

import argparse
import dataclasses
import sys

from .harness import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    ConfigError,
    derive_replicate_seed,
    emit_reports,
    load_config,
    run_experiment,
    validate_config,
)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perpsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a TOML/JSON config")
    run.add_argument("config", help="path to the config file")
    run.add_argument("--threads", type=int, default=1, metavar="N")
    run.add_argument("--output", default=None, metavar="DIR", help="override output_dir")
    run.add_argument("--seed", type=int, default=None, metavar="S", help="override master_seed")

    val = sub.add_parser("validate", help="validate a config file without running")
    val.add_argument("config")

    seeds = sub.add_parser("seeds", help="print the derived replicate seeds")
    seeds.add_argument("config")
    seeds.add_argument("--count", type=int, default=None, help="how many to print (default n_replicates)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg = dataclasses.replace(cfg, master_seed=args.seed)
        if getattr(args, "output", None) is not None:
            cfg = dataclasses.replace(cfg, output_dir=args.output)
        validate_config(cfg)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    if args.command == "validate":
        print(f"ok: {cfg.experiment} (seed {cfg.master_seed})")
        return EXIT_OK

    if args.command == "seeds":
        count = args.count if args.count is not None else cfg.n_replicates
        for i in range(count):
            rng = derive_replicate_seed(cfg.master_seed, i)
            probe = rng.integers(0, 2**63 - 1)
            print(f"{i}\t{probe}")
        return EXIT_OK

    bundle = run_experiment(cfg, threads=args.threads)
    written = emit_reports(bundle, cfg.output_dir)
    for path in written:
        print(f"wrote {path}")
    if not bundle.passed:
        print("checks FAILED", file=sys.stderr)
        return EXIT_CHECK_FAILED
    print("checks passed")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
