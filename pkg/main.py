#!/usr/bin/env python3
"""
DTKC - Main Entry Point

Deep divergence-based clustering with tensor-kernel companion objectives.
Run ``python main.py --help`` for the list of subcommands.
"""

import sys
from pathlib import Path
from typing import List, Optional

import torch
from loguru import logger

# Flat top-level packages (config, core, networks, ...) resolve from here
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config.settings import settings
from cli.commands import run_command


def setup_logging(log_dir: Optional[Path] = None) -> Path:
    """Install the stderr sink and the rotating ``dtkc.log`` file sink; returns the log file."""
    logger.remove()

    # Console handler on stderr; stdout carries JSON reports
    logger.add(
        sys.stderr,
        level=settings.log_level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
    )

    log_file = Path(log_dir or settings.log_dir) / "dtkc.log"
    logger.add(
        log_file,
        rotation="10 MB",
        retention="30 days",
        level=settings.log_level,
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"
    )

    logger.debug(f"Logging to {log_file}")
    return log_file


def cli(argv: Optional[List[str]] = None) -> int:
    """Entry point returning the process exit code."""
    setup_logging()
    torch.set_num_threads(settings.num_threads)
    return run_command(argv)


if __name__ == "__main__":
    try:
        sys.exit(cli())
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        sys.exit(1)
    except Exception as e:
        logger.error(f"Unhandled exception: {e}")
        sys.exit(1)
