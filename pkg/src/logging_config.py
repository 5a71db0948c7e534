"""Logging configuration for Conformance Forge.

Everything goes to ``conformance_forge.log`` at DEBUG; the console (stderr, so
report output on stdout stays clean) shows warnings unless ``-v`` is given.
"""

import getpass
import logging
import os
import platform
import sys
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Optional

LOG_DIR_ENV = "CONFORMANCE_FORGE_LOG_DIR"
LOG_FILE_NAME = "conformance_forge.log"

FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(funcName)s - %(message)s"
CONSOLE_FORMAT = "%(levelname)s: %(message)s"

# HTTP client internals from the live backend
_NOISY_LIBRARIES = ("urllib3", "requests")


def _log_dir() -> str:
    """$CONFORMANCE_FORGE_LOG_DIR, else the repository root."""
    return os.environ.get(LOG_DIR_ENV) or os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def _file_handler(log_dir: str) -> Optional[logging.Handler]:
    try:
        os.makedirs(log_dir, exist_ok=True)
        handler = RotatingFileHandler(
            os.path.join(log_dir, LOG_FILE_NAME),
            maxBytes=5 * 1024 * 1024,
            backupCount=3,
            encoding="utf-8",
        )
    except OSError as e:
        print(f"Warning: Could not create log file in {log_dir}: {e}", file=sys.stderr)
        return None
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(FILE_FORMAT))
    return handler


logger = logging.getLogger("conformance_forge")
logger.setLevel(logging.DEBUG)

file_handler = _file_handler(_log_dir())
if file_handler is not None:
    logger.addHandler(file_handler)

console_handler = logging.StreamHandler(sys.stderr)
console_handler.setLevel(logging.WARNING)
console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
logger.addHandler(console_handler)

for _name in _NOISY_LIBRARIES:
    logging.getLogger(_name).setLevel(logging.WARNING)


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Get a logger instance.

    Args:
        name: Optional name for the logger (will be prefixed with 'conformance_forge.')

    Returns:
        Logger instance
    """
    if name:
        return logging.getLogger(f"conformance_forge.{name}")
    return logger


def set_console_level(level: int) -> None:
    """Change the console verbosity (the log file always records DEBUG)."""
    console_handler.setLevel(level)


def log_startup_info(command: str = "") -> None:
    """Write a banner for one CLI invocation to the log file."""
    from . import version_string

    try:
        user = f"{getpass.getuser()}@{platform.node()}"
    except Exception:
        user = "unknown"

    logger.info("=" * 71)
    logger.info(f"  {version_string()}")
    logger.info(f"  Command: {command or '-'} (argv: {' '.join(sys.argv[1:])})")
    logger.info(f"  User: {user}")
    logger.info(f"  Python {platform.python_version()} on {platform.system()} {platform.release()}")
    logger.info(f"  Working directory: {os.getcwd()}")
    logger.info(f"  Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    logger.info("=" * 71)
