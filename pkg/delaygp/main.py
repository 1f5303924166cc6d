"""Command-line entry point: ``python -m delaygp.main <command>``."""

import logging
import sys
from typing import List, Optional

from .api.cli import build_parser, run_command
from .infrastructure.config import get_settings

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def main(argv: Optional[List[str]] = None) -> int:
    """Parse argv, configure logging and run the command."""
    args = build_parser().parse_args(argv)
    settings = get_settings()
    level = logging.WARNING if args.quiet else settings.log_level
    logging.basicConfig(level=level, format=LOG_FORMAT)
    return run_command(args, settings)


if __name__ == "__main__":
    sys.exit(main())
