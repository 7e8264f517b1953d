# /main.py
# This is the main entry point for the Idiotypic Recommender. It sets up logging from the settings,
# parses the subcommand and maps application errors onto process exit codes.
from __future__ import annotations

import logging
import sys
from typing import Sequence

from api.routes import build_parser
from settings import settings
from utils.errors import AppError

log = logging.getLogger("idiorec")


def configure_logging() -> None:
    logging.basicConfig(level=settings.log_level.upper(), format=settings.log_format, stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except AppError as e:
        log.error("%s", e.message)
        return e.exit_code
    except OSError as e:
        log.error("I/O failure: %s", e)
        return 3
    except Exception:
        log.exception("internal error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
