# src/app/log_manager.py
"""
Console logging in the bracketed-tag style:

    [TRAIN] epoch=50 loss=-0.412 ...
    [SELECT ERROR] budget groups=20 unreachable ...

The tag is derived from the logger name; warnings and errors append the
level to the tag and everything is coloured with termcolor when the
stream is a terminal.
"""

from __future__ import annotations
import logging
import os
import sys
from typing import Dict, Optional, TextIO

from termcolor import colored

from config.settings import APP_NAME, DEFAULT_LOG_LEVEL, LOG_LEVEL_ENV

TAGS: Dict[str, str] = {
    "optim": "TRAIN",
    "selection": "SELECT",
    "evaluation": "EVAL",
    "gradcheck": "GRADCHECK",
    "data": "DATA",
    "graph": "GRAPH",
    "losses": "LOSS",
    "preset_manager": "PRESET",
    "command_manager": "CMD",
    "artifact_store": "STORE",
    "sweep_worker": "SWEEP",
    "__main__": "MAIN",
    "main": "MAIN",
}

LEVEL_COLORS: Dict[int, str] = {
    logging.DEBUG: "dark_grey",
    logging.INFO: "cyan",
    logging.WARNING: "yellow",
    logging.ERROR: "red",
    logging.CRITICAL: "magenta",
}


def tag_for(logger_name: str) -> str:
    tail = logger_name.rsplit(".", 1)[-1]
    return TAGS.get(tail, tail.upper())


class TagFormatter(logging.Formatter):
    def __init__(self, use_color: bool = True):
        super().__init__()
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        tag = tag_for(record.name)
        if record.levelno >= logging.WARNING:
            tag = f"{tag} {record.levelname}"
        prefix = f"[{tag}]"
        if self.use_color:
            prefix = colored(prefix, LEVEL_COLORS.get(record.levelno, "white"))
        message = f"{prefix} {record.getMessage()}"
        if record.exc_info:
            message = f"{message}\n{self.formatException(record.exc_info)}"
        return message


def resolve_level(level: Optional[str] = None) -> int:
    name = (level or os.environ.get(LOG_LEVEL_ENV) or DEFAULT_LOG_LEVEL).upper()
    value = logging.getLevelName(name)
    if not isinstance(value, int):
        raise ValueError(f"unknown log level {name!r}")
    return value


def configure_logging(level: Optional[str] = None, stream: Optional[TextIO] = None) -> logging.Logger:
    """Install the tag formatter on the root logger (idempotent)."""
    stream = stream or sys.stderr
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_groupfs", False):
            root.removeHandler(handler)

    handler = logging.StreamHandler(stream)
    handler._groupfs = True
    handler.setFormatter(TagFormatter(use_color=hasattr(stream, "isatty") and stream.isatty()))
    root.addHandler(handler)
    root.setLevel(resolve_level(level))
    return logging.getLogger(APP_NAME)
