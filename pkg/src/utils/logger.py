"""Logging setup for reconstruction runs.

Library modules log through plain ``logging.getLogger(__name__)`` loggers.
``configure_logging`` attaches the sinks once, on the package logger, from
the ``logging`` section of the settings:

* console: text lines on stderr (stdout carries the CSV rows of the CLI)
* file: rotating JSON lines, one object per record

Structured fields given to ``log_structured`` (loss parts, learning rate,
PSNR, ...) become top-level JSON keys, and every record also carries the run
context (mode, seed, scene) bound by ``configure_logging``.
"""

import json
import logging
import math
import sys
from collections.abc import Mapping
from datetime import datetime, timezone
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Optional

import numpy as np

from src.utils.config import LoggingConfig

PACKAGE_LOGGER = "src"
FILE_PATTERN = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
CONSOLE_PATTERN = "%(asctime)s - %(levelname)s - %(message)s"


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, float) and not math.isfinite(value):
        # JSON has no NaN/inf; aborted steps still need a parsable line
        return str(value)
    if isinstance(value, Path):
        return str(value)
    return value


def _fields(record: logging.LogRecord) -> dict[str, Any]:
    fields: dict[str, Any] = dict(getattr(record, "run_context", None) or {})
    fields.update(getattr(record, "extra_fields", None) or {})
    return fields


class JSONFormatter(logging.Formatter):
    """One JSON object per record with context and structured fields flattened in."""

    def format(self, record: logging.LogRecord) -> str:
        data: dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            data["exception"] = self.formatException(record.exc_info)
        data.update({k: _jsonable(v) for k, v in _fields(record).items()})
        return json.dumps(data)


class TextFormatter(logging.Formatter):
    """Text formatter that appends structured fields as key=value pairs."""

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        fields = getattr(record, "extra_fields", None)
        if fields:
            pairs = " ".join(f"{k}={_short(v)}" for k, v in fields.items())
            line = f"{line} | {pairs}"
        return line


def _short(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


class RunContextFilter(logging.Filter):
    """Stamps every record passing a handler with the fields of the current run."""

    def __init__(self, context: Optional[Mapping[str, Any]] = None):
        super().__init__()
        self.context = dict(context or {})

    def filter(self, record: logging.LogRecord) -> bool:
        record.run_context = self.context
        return True


def _formatter(kind: str, pattern: str, datefmt: Optional[str] = None) -> logging.Formatter:
    if kind == "json":
        return JSONFormatter()
    return TextFormatter(pattern, datefmt=datefmt)


def configure_logging(
    cfg: LoggingConfig,
    level: Optional[str] = None,
    context: Optional[Mapping[str, Any]] = None,
    name: str = PACKAGE_LOGGER,
) -> logging.Logger:
    """Attach console and file handlers for one run and return the configured logger.

    Args:
        cfg: The ``logging`` settings section.
        level: Overrides ``cfg.level`` (the CLI passes ``DEBUG`` for ``-v``).
        context: Run fields added to every JSON record, e.g. mode and seed.
        name: Logger to configure; the default covers the whole package.

    Calling it again replaces the handlers, so consecutive runs in one
    process (ablation) do not duplicate output.
    """
    resolved = getattr(logging, (level or cfg.level).upper())
    logger = logging.getLogger(name)
    logger.setLevel(resolved)
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)
    logger.propagate = False
    run_filter = RunContextFilter(context)

    if cfg.file:
        log_path = Path(cfg.file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_path,
            maxBytes=cfg.rotate_size_mb * 1024 * 1024,
            backupCount=cfg.backup_count,
            encoding="utf-8",
        )
        file_handler.setFormatter(_formatter(cfg.format, FILE_PATTERN))
        file_handler.addFilter(run_filter)
        logger.addHandler(file_handler)

    if cfg.console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(
            _formatter(cfg.console_format, CONSOLE_PATTERN, datefmt="%Y-%m-%d %H:%M:%S")
        )
        console_handler.addFilter(run_filter)
        logger.addHandler(console_handler)

    return logger


def log_structured(logger: logging.Logger, level: int, message: str, **extra: Any) -> None:
    """Emit a record carrying structured fields on any standard logger.

    Example:
        >>> log_structured(logger, logging.INFO, "Training step", iter=10, total=0.42)
    """
    if not logger.isEnabledFor(level):
        return
    logger.log(level, message, extra={"extra_fields": extra} if extra else None)
