"""Command-line entry point: ``finex <subcommand> --config run.yaml``."""
from __future__ import annotations

import argparse
import logging
import sys

from finex.config import load_config
from finex.errors import FinexError, StageError
from finex.ingest import ingest
from finex.infrastructure import InfraKind
from finex.pipeline import run_pipeline

SUBCOMMANDS = {
    "ingest-check": (),
    "catchment": ("catchment",),
    "nni": ("nni",),
    "index": ("index",),
    "validate": ("validate",),
    "scenario": ("scenario",),
    "run-all": ("catchment", "nni", "index", "validate", "scenario"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finex", description="Small-area financial-exclusion index")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML or JSON run configuration")
        p.add_argument("--radius", type=float, help="catchment radius in metres")
        p.add_argument("--lonely-threshold", type=float, help="lonely-ATM distance threshold in metres")
        p.add_argument("--jenks-k", type=int, help="number of natural-breaks classes")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config).with_overrides(
            radius=args.radius,
            lonely_threshold=args.lonely_threshold,
            jenks_k=args.jenks_k,
            output_dir=args.out,
        )
        if args.command == "ingest-check":
            try:
                data = ingest(config)
            except FinexError as exc:
                raise StageError("ingest", exc) from exc
            kinds = ", ".join(f"{k.value}={sum(1 for p in data.points if p.kind is k)}" for k in InfraKind)
            print(f"areas: {len(data.areas)}")
            print(f"points: {len(data.points)} ({kinds})")
            print(f"study area: {data.study_area.area_m2:.1f} m2" if data.study_area else "study area: none")
            print(f"ward lookup: {'yes' if data.ward_lookup else 'no'}; historical ranks: {'yes' if data.historical_ranks else 'no'}")
            for note in data.notes:
                print(f"note: {note}")
            return 0
        result = run_pipeline(config, SUBCOMMANDS[args.command])
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FinexError as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return 2
    for name in result.written:
        print(config.output_dir / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
