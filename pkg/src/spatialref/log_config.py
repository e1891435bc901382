"""Logging configuration for spatialref."""

import logging
import sys
from datetime import datetime
from pathlib import Path

# Map log level strings to logging constants
LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level_str: str = "WARNING", log_dir: str | Path | None = "logs") -> None:
    """Configure logging for the application.

    Args:
        level_str: Logging level string (e.g., 'DEBUG', 'INFO'). Default: 'WARNING'
        log_dir: Directory for the timestamped log file, or None to log to
            stdout only
    """
    level = LOG_LEVELS.get(level_str.upper(), logging.WARNING)

    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if log_dir is not None:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)
        log_file = (
            log_path / f"spatialref_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
        )
        handlers.insert(0, logging.FileHandler(log_file))

    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def get_logger(name: str | None = None) -> logging.Logger:
    """Get a logger instance.

    Args:
        name: Logger name (default: None)

    Returns:
        logging.Logger: Logger instance
    """
    return logging.getLogger(name)
