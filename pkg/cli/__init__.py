"""Command-line surface."""
from .commands import build_parser, run_command

__all__ = ["build_parser", "run_command"]
