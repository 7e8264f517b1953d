# /api/sweep.py
# `sweep`: AIS neighbourhood size and reviewers examined across stimulation rates.
from __future__ import annotations

import argparse

from api.common import add_run_arguments, add_table_arguments, load_table
from services.config import load_config
from services.experiment import ExperimentRunner
from api.export import export_sweep
from utils.errors import usage_error


def parse_rates(text: str) -> list[float]:
    try:
        rates = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise usage_error(f"--rates must be comma separated numbers, got {text!r}") from None
    if not rates:
        raise usage_error("--rates needs at least one rate")
    if any(r < 0 for r in rates):
        raise usage_error("stimulation rates must be non-negative")
    return rates


def register(sub: argparse._SubParsersAction) -> None:
    parser = sub.add_parser("sweep", help="neighbourhood size against stimulation rate")
    parser.add_argument("--rates", required=True, help="e.g. 0.05,0.1,0.2,0.3,0.45,0.6")
    add_table_arguments(parser)
    add_run_arguments(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    rates = parse_rates(args.rates)
    config = load_config(args.config)
    table = load_table(args, config)
    points = ExperimentRunner(table, config, max_workers=args.workers).sweep(rates)
    export_sweep(points, args.out, args.format)

    for p in points:
        print(f"k1={p.rate:<6g} size={p.size.mean:.3f} reviewers={p.reviewers_examined.mean:.3f}")
    return 0
