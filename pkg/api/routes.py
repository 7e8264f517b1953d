# /api/routes.py
# This module builds the command-line parser for the Idiotypic Recommender, composing the
# individual subcommand parsers the same way every subcommand module registers itself.
from __future__ import annotations

import argparse
from typing import NoReturn

from api import gen, run, stats, sweep
from settings import settings
from utils.errors import usage_error


class CliParser(argparse.ArgumentParser):
    """argparse failures become usage errors (exit 1) instead of argparse's own exit."""

    def error(self, message: str) -> NoReturn:
        raise usage_error(f"{self.prog}: {message}")


def build_parser() -> CliParser:
    parser = CliParser(prog="idiorec", description=settings.app_name)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)
    for module in (run, sweep, stats, gen):
        module.register(sub)
    return parser
