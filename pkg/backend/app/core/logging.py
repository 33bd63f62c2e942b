"""
Logging configuration with structured JSON output.

Features:
- JSON and console logging
- Analysis context tracking (run id, command, seed)
- Sentry breadcrumbs via the logging integration
- Execution-time decorator
- Optional rotating file handler
"""
import functools
import logging
import logging.config
import time
import uuid
from datetime import datetime, timezone
from typing import Any, Callable, Dict, Optional, TypeVar, cast

from pythonjsonlogger import jsonlogger

from app.core import config as config_module

T = TypeVar("T", bound=Callable[..., Any])


class AnalysisContext:
    """Per-process context stamped on every JSON log record."""

    _run_id: str = ""
    _command: Optional[str] = None
    _seed: Optional[int] = None

    @classmethod
    def get_run_id(cls) -> str:
        if not cls._run_id:
            cls._run_id = uuid.uuid4().hex[:12]
        return cls._run_id

    @classmethod
    def set_context(
        cls,
        run_id: Optional[str] = None,
        command: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> None:
        if run_id:
            cls._run_id = run_id
        if command:
            cls._command = command
        if seed is not None:
            cls._seed = seed

    @classmethod
    def clear(cls) -> None:
        cls._run_id = ""
        cls._command = None
        cls._seed = None


class CustomJsonFormatter(jsonlogger.JsonFormatter):
    """JSON formatter adding service metadata and analysis context."""

    def add_fields(
        self, log_record: Dict[str, Any], record: logging.LogRecord, message_dict: Dict[str, Any]
    ) -> None:
        super().add_fields(log_record, record, message_dict)
        settings = config_module.settings

        log_record["level"] = record.levelname
        log_record["logger"] = record.name
        log_record["timestamp"] = (
            datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat().replace("+00:00", "Z")
        )
        log_record["environment"] = settings.ENVIRONMENT
        log_record["service"] = settings.PROJECT_NAME
        log_record["version"] = settings.VERSION

        if AnalysisContext._run_id:
            log_record["run_id"] = AnalysisContext._run_id
        if AnalysisContext._command:
            log_record["command"] = AnalysisContext._command
        if AnalysisContext._seed is not None:
            log_record["seed"] = AnalysisContext._seed

        if hasattr(record, "duration_ms"):
            log_record["duration_ms"] = record.duration_ms

        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)

        log_record["thread"] = record.thread


def configure_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> None:
    """Configure the ``app`` logger tree. Logs go to stderr; stdout carries reports."""
    settings = config_module.settings
    level = (level or settings.LOG_LEVEL).upper()
    fmt = (fmt or settings.LOG_FORMAT).lower()

    handlers: Dict[str, Dict[str, Any]] = {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "json" if fmt == "json" else "simple",
            "stream": "ext://sys.stderr",
        },
    }
    if settings.LOG_FILE:
        handlers["file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "formatter": "json",
            "filename": settings.LOG_FILE,
            "maxBytes": 10485760,  # 10MB
            "backupCount": 5,
            "encoding": "utf8",
        }

    logging.config.dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "json": {
                    "()": "app.core.logging.CustomJsonFormatter",
                    "format": "%(timestamp)s %(level)s %(name)s %(message)s",
                },
                "simple": {
                    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
                },
            },
            "handlers": handlers,
            "loggers": {
                "app": {
                    "handlers": list(handlers),
                    "level": level,
                    "propagate": False,
                },
                "uvicorn": {
                    "handlers": ["console"],
                    "level": "WARNING",
                    "propagate": False,
                },
            },
        }
    )


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Get a logger under the ``app`` hierarchy.

    Args:
        name: Logger name (usually __name__)
    """
    name = name or "app"
    if not name.startswith("app"):
        name = f"app.{name}"
    return logging.getLogger(name)


def log_execution_time(logger: Optional[logging.Logger] = None):
    """Decorator to log function execution time."""
    if logger is None:
        logger = get_logger(__name__)

    def decorator(func: T) -> T:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                duration = (time.perf_counter() - start_time) * 1000  # ms
                logger.debug(
                    "Function %s executed in %.2fms",
                    func.__name__,
                    duration,
                    extra={"duration_ms": duration},
                )
        return cast(T, wrapper)
    return decorator
