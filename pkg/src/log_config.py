"""
Logging setup for the simulator.

Library modules only call logging.getLogger(__name__); the CLI (or a script)
calls configure_logging() once.
"""

import logging
import os

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVEL_ENV = "URVFL_LOG_LEVEL"


def configure_logging(level: str = None, log_file: str = None) -> logging.Logger:
    """Attach stream (and optional file) handlers to the `src` logger."""
    level = level or os.environ.get(LOG_LEVEL_ENV, "INFO")
    logger = logging.getLogger("src")
    logger.setLevel(level.upper() if isinstance(level, str) else level)

    # replace, never stack
    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    formatter = logging.Formatter(LOG_FORMAT)
    stream = logging.StreamHandler()
    stream.setFormatter(formatter)
    logger.addHandler(stream)

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.propagate = False
    return logger
