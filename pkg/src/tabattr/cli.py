"""Command-line entry point.

Verbs:

* ``tabattr synthetic`` - run the ground-truth benchmark and write
  aggregate/per-seed reports.
* ``tabattr roar``      - run remove-and-retrain on synthetic or CSV
  datasets and write curve/area reports.
* ``tabattr report``    - re-emit a results.json as csv/markdown/json.

All defaults reproduce the standard benchmark; flags override the
config file, which overrides the defaults. Exit code is 0 only if every
cell succeeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiment import (ConfigError, ExperimentConfig, emit_report,
                         run_roar_experiment, run_synthetic_benchmark)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--cache-dir", type=Path, help="model cache directory")
    p.add_argument("--seeds", type=str,
                   help="comma-separated seed override, e.g. 0,1,2,42")
    p.add_argument("--datasets", type=str, help="comma-separated dataset names")
    p.add_argument("--methods", type=str, help="comma-separated method names")
    p.add_argument("--epochs", type=int, help="training epochs override")
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")


def _build_config(args, kind: str) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig()
    config.kind = kind
    if args.out:
        config.output_dir = str(args.out)
    if args.cache_dir:
        config.cache_dir = str(args.cache_dir)
    if args.seeds:
        config.seeds = [int(s) for s in args.seeds.split(",") if s]
    if args.datasets:
        config.datasets = args.datasets.split(",")
    if args.methods:
        config.methods = args.methods.split(",")
    if args.epochs is not None:
        config.epochs = args.epochs
    if getattr(args, "subsample", None) is not None:
        config.row_subsample = args.subsample
    if getattr(args, "adult_csv", None):
        config.adult_csv = str(args.adult_csv)
    if getattr(args, "credit_csv", None):
        config.credit_csv = str(args.credit_csv)
    if getattr(args, "fractions", None):
        config.roar_fractions = [float(f) for f in args.fractions.split(",")]
    if getattr(args, "reference_rankings", False):
        config.include_reference_rankings = True
    config.__post_init__()  # revalidate after overrides
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tabattr", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_syn = sub.add_parser("synthetic", help="ground-truth attribution benchmark")
    _add_common(p_syn)

    p_roar = sub.add_parser("roar", help="remove-and-retrain evaluation")
    _add_common(p_roar)
    p_roar.add_argument("--adult-csv", type=Path, help="path to the adult CSV")
    p_roar.add_argument("--credit-csv", type=Path, help="path to the credit CSV")
    p_roar.add_argument("--subsample", type=int,
                        help="desk-scale cap on total real-data rows")
    p_roar.add_argument("--fractions", type=str,
                        help="comma-separated removal fractions")
    p_roar.add_argument("--reference-rankings", action="store_true",
                        help="also run ground-truth and random rankings")

    p_rep = sub.add_parser("report", help="re-emit a results.json")
    p_rep.add_argument("--results", type=Path, required=True)
    p_rep.add_argument("--format", choices=("csv", "json", "markdown"),
                       default="markdown")
    p_rep.add_argument("--out", type=Path, required=True)

    args = parser.parse_args(argv)

    if args.verb == "report":
        payload = json.loads(args.results.read_text())
        aggregates = payload.get("aggregates", [])
        if not aggregates:
            print("error: results file holds no aggregate rows", file=sys.stderr)
            return 1
        emit_report(aggregates, args.format, args.out)
        print(f"wrote {args.out}")
        return 0

    progress = None if args.quiet else lambda msg: print(msg, flush=True)
    try:
        if args.verb == "synthetic":
            config = _build_config(args, "synthetic")
            result = run_synthetic_benchmark(config, progress=progress)
        else:
            config = _build_config(args, "roar")
            if not args.datasets and not args.config:
                raise ConfigError("roar requires --datasets (or a config file)")
            result = run_roar_experiment(config, progress=progress)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    for f in result.output_files:
        print(f"wrote {f}")
    if result.errors:
        for cell, err in result.errors.items():
            print(f"cell failed: {cell}: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
