# /api/common.py
# Arguments and loaders shared by the subcommands that read a ratings table.
from __future__ import annotations

import argparse

from services.config import ExperimentConfig
from services.dataset import RatingsTable, generate_synthetic, load_ratings
from api.export import ExportFormat
from settings import settings


def add_table_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--ratings", metavar="FILE", help="user_id,item_id,vote lines")
    source.add_argument("--synthetic", action="store_true", help="use the seeded clustered generator")
    parser.add_argument("--seed", type=int, default=0, help="generator seed for --synthetic (default 0)")


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="key = value experiment config")
    parser.add_argument("--out", metavar="DIR", required=True)
    parser.add_argument("--format", choices=[f.value for f in ExportFormat], default=ExportFormat.CSV.value)
    parser.add_argument("--workers", type=int, default=None, help=f"parallel trials (default {settings.max_workers})")


def load_table(args: argparse.Namespace, config: ExperimentConfig) -> RatingsTable:
    if args.synthetic:
        return generate_synthetic(
            settings.synthetic_users,
            settings.synthetic_items,
            settings.synthetic_clusters,
            settings.synthetic_density,
            settings.synthetic_noise,
            config.scale,
            args.seed,
        )
    return load_ratings(args.ratings, config.scale)
