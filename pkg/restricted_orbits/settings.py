"""
Process settings for the restricted 4-body toolkit.
Reads environment (and an optional .env file) once at import.
"""

import logging
import os

from dotenv import load_dotenv

load_dotenv()

THREADS_ENV = "RESTRICTED_ORBITS_THREADS"
LOG_LEVEL_ENV = "RESTRICTED_ORBITS_LOG_LEVEL"

# Upper bound on the default worker count when the env var is unset
DEFAULT_MAX_THREADS = 8

logger = logging.getLogger(__name__)


def get_thread_limit():
    """
    Get the parallelism cap from the environment or default to the CPU count.

    Set RESTRICTED_ORBITS_THREADS to a positive integer to override, e.g.
    RESTRICTED_ORBITS_THREADS=1 for strictly serial table evaluation.
    """
    default = max(1, min(os.cpu_count() or 1, DEFAULT_MAX_THREADS))
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning("⚠️ [settings] %s=%r is not an integer, using %d", THREADS_ENV, raw, default)
        return default
    if value < 1:
        logger.warning("⚠️ [settings] %s=%r must be >= 1, using %d", THREADS_ENV, raw, default)
        return default
    return value


def get_log_level():
    """Log level name from the environment (default WARNING)."""
    return os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()


def configure_logging(level=None):
    """Install a single stream handler on the package logger."""
    level = (level or get_log_level()).upper()
    package_logger = logging.getLogger("restricted_orbits")
    if not package_logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(message)s"))
        package_logger.addHandler(handler)
    package_logger.setLevel(getattr(logging, level, logging.WARNING))
    return package_logger
