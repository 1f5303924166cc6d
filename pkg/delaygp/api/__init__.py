# API package
from .cli import EXIT_CODES, build_parser, run_command

__all__ = ["EXIT_CODES", "build_parser", "run_command"]
