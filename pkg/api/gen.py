# /api/gen.py
# `gen`: write a seeded synthetic ratings file.
from __future__ import annotations

import argparse

from services.dataset import VoteScale, generate_synthetic, save_ratings
from settings import settings


def register(sub: argparse._SubParsersAction) -> None:
    parser = sub.add_parser("gen", help="generate a clustered synthetic ratings file")
    parser.add_argument("--users", type=int, default=settings.synthetic_users)
    parser.add_argument("--items", type=int, default=settings.synthetic_items)
    parser.add_argument("--clusters", type=int, default=settings.synthetic_clusters)
    parser.add_argument("--density", type=float, default=settings.synthetic_density)
    parser.add_argument("--noise", type=float, default=settings.synthetic_noise)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", metavar="FILE", required=True)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    scale = VoteScale(min_vote=settings.min_vote, max_vote=settings.max_vote, step=settings.vote_step)
    table = generate_synthetic(args.users, args.items, args.clusters, args.density, args.noise, scale, args.seed)
    save_ratings(table, args.out)
    print(f"wrote {len(table)} votes from {len(table.users())} users to {args.out}")
    return 0
