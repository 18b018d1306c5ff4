import logging
import sys

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str | int = "INFO") -> logging.Logger:
    """Install a single stderr handler on the package logger.

    Library modules only ever call ``logging.getLogger(__name__)``; handlers are
    configured here, once, by the command line entry point.
    """
    root = logging.getLogger("fundusnet")
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    root.setLevel(level)
    for handler in list(root.handlers):
        if getattr(handler, "_fundusnet", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._fundusnet = True
    root.addHandler(handler)
    root.propagate = False
    return root
