# /api/stats.py
# `stats`: rebuild the neighbourhood characteristics table from the trials file of a saved run.
from __future__ import annotations

import argparse

from api.schemas import CharacteristicRow, TrialRow
from services.config import load_config
from services.experiment import compare_characteristics
from api.export import (
    CHARACTERISTICS_FILE,
    ExportFormat,
    characteristic_rows,
    file_for,
    find_trials_file,
    read_rows,
    trial_stats,
    write_rows,
)
from utils.text import format_number


def register(sub: argparse._SubParsersAction) -> None:
    parser = sub.add_parser("stats", help="recompute neighbourhood characteristics from a saved run")
    parser.add_argument("--out", metavar="DIR", required=True, help="directory of a previous run")
    parser.add_argument("--config", metavar="FILE", help="only exact_cutoff is used")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    trials = find_trials_file(args.out)
    fmt = ExportFormat(trials.suffix.lstrip("."))
    comparisons = compare_characteristics(trial_stats(read_rows(trials, TrialRow)), config.exact_cutoff)
    rows = characteristic_rows(comparisons)
    write_rows(file_for(args.out, CHARACTERISTICS_FILE, fmt), CharacteristicRow, rows, fmt)

    for r in rows:
        print(
            f"{r.characteristic:26} SP={format_number(r.mean_sp):>22} AIS={format_number(r.mean_ais):>22} "
            f"n={r.n_unequal} p<={format_number(r.p_upper_bound)}"
        )
    return 0
