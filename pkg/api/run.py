# /api/run.py
# `run`: the full regime-matrix experiment, exported to a directory.
from __future__ import annotations

import argparse

from api.common import add_run_arguments, add_table_arguments, load_table
from services.config import load_config
from services.experiment import ExperimentRunner
from api.export import export_results
from utils.text import format_number


def register(sub: argparse._SubParsersAction) -> None:
    parser = sub.add_parser("run", help="run trials under every predictor/neighbourhood regime")
    add_table_arguments(parser)
    add_run_arguments(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    table = load_table(args, config)
    result = ExperimentRunner(table, config, max_workers=args.workers).run()
    export_results(result, args.out, args.format)

    for s in result.summary.regimes:
        print(f"{s.regime.value:8} mae={format_number(s.mae.mean):>22} tau={format_number(s.tau.mean):>22} size={format_number(s.size.mean)}")
    return 0
