"""
TripleKey - Logging

One logger tree ("TripleKey.*").  Library modules only ask for their named
logger; the CLI calls setup_logging() once to attach handlers.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

ROOT_LOGGER = "TripleKey"
LOG_FORMAT = "[%(asctime)s] %(levelname)-8s: %(name)s: %(message)s"
DATE_FORMAT = "%Y%m%d_%H%M%S"


def setup_logging(
    log_dir: Path | None,
    log_filename: str = "triplekey.log",
    console_level: str = "INFO",
) -> logging.Logger:
    """Configure logging to a file (DEBUG) and stdout (console_level).

    Calling it twice is harmless: handlers are only attached once.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(logging.DEBUG)

    if logger.handlers:
        return logger

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_dir / log_filename, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(getattr(logging, console_level.upper(), logging.INFO))
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    return logger
