"""
Logging configuration module.

All diagnostics of the command line go through the root logger to stderr
(and optionally a log file), so CSV and JSON artifacts on stdout or on disk
never carry log text. Library modules only call logging.getLogger(__name__).
"""

import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, TextIO, Union

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
BANNER_WIDTH = 70

DETAILED_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
SIMPLE_FORMAT = "%(levelname)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def normalize_level(level: str) -> str:
    """
    Upper-case a level name and check it is one of LOG_LEVELS.

    Raises:
        ValueError: For an unknown level name
    """
    name = str(level).strip().upper()
    if name not in LOG_LEVELS:
        raise ValueError(f"Unknown log level '{level}' (expected one of {', '.join(LOG_LEVELS)})")
    return name


def setup_logging(
    level: str = "INFO",
    log_file: Optional[Union[str, Path]] = None,
    log_to_console: bool = True,
    stream: Optional[TextIO] = None,
) -> None:
    """
    Configure the root logger for a command-line run.

    Calling it again replaces (and closes) the handlers of the previous call.

    Args:
        level: One of LOG_LEVELS, case-insensitive
        log_file: Optional log file; its directory is created on demand
        log_to_console: Whether to log to the diagnostics stream
        stream: Diagnostics stream (default: sys.stderr at call time)
    """
    numeric_level = getattr(logging, normalize_level(level))
    detailed = logging.Formatter(fmt=DETAILED_FORMAT, datefmt=DATE_FORMAT)

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()

    if log_to_console:
        console_handler = logging.StreamHandler(stream or sys.stderr)
        console_handler.setLevel(numeric_level)
        # Timestamps and module names only when debugging
        if numeric_level <= logging.DEBUG:
            console_handler.setFormatter(detailed)
        else:
            console_handler.setFormatter(logging.Formatter(fmt=SIMPLE_FORMAT))
        root_logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_path, encoding="utf-8")
        file_handler.setLevel(numeric_level)
        file_handler.setFormatter(detailed)
        root_logger.addHandler(file_handler)
        root_logger.debug(f"Logging to file: {log_path}")


def create_log_filename(prefix: str = "mtf", directory: Optional[Union[str, Path]] = None) -> Path:
    """
    Timestamped log file name, placed in directory when one is given.

    Returns:
        Path: e.g. output/mtf_solve_20240101_120000.log
    """
    name = f"{prefix}_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
    return Path(directory) / name if directory is not None else Path(name)


def log_banner(logger: logging.Logger, title: str) -> None:
    """Log a title between two rules at INFO."""
    logger.info("=" * BANNER_WIDTH)
    logger.info(title)
    logger.info("=" * BANNER_WIDTH)


def suppress_third_party_logs() -> None:
    # python-dotenv warns about every missing .env file
    logging.getLogger("dotenv.main").setLevel(logging.ERROR)
    logging.getLogger("concurrent.futures").setLevel(logging.WARNING)
