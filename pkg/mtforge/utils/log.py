# mtforge/utils/log.py
import logging
import os
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

ENV_VAR = "MTFORGE_LOG"

_SHORTHAND = {"0": "WARNING", "1": "INFO", "2": "DEBUG"}


def resolve_level(value: Optional[str]) -> int:
    """Map an MTFORGE_LOG value to a logging level (default WARNING)."""
    if not value:
        return logging.WARNING
    name = _SHORTHAND.get(value.strip(), value.strip().upper())
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.WARNING


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    """Install a single RichHandler on the package logger, writing to stderr."""
    logger = logging.getLogger("mtforge")
    logger.setLevel(resolve_level(level if level is not None else os.environ.get(ENV_VAR)))

    for handler in list(logger.handlers):
        if getattr(handler, "_mtforge", False):
            logger.removeHandler(handler)

    handler = RichHandler(
        console=Console(stderr=True),
        show_time=False,
        show_path=False,
        markup=False,
        rich_tracebacks=True,
    )
    handler._mtforge = True
    logger.addHandler(handler)
    return logger
