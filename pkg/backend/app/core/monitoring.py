"""
Error tracking configuration.
"""
import logging
from typing import Any, Dict, Optional

import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration

from app.core import config as config_module

_initialized = False


def init_sentry() -> bool:
    """Initialize Sentry when a DSN is configured. Returns whether it is active."""
    global _initialized
    settings = config_module.settings
    if not settings.SENTRY_DSN:
        return False
    if _initialized:
        return True

    sentry_sdk.init(
        dsn=settings.SENTRY_DSN,
        environment=settings.ENVIRONMENT,
        release=f"{settings.PROJECT_NAME}@{settings.VERSION}",
        integrations=[
            LoggingIntegration(
                level=logging.INFO,  # breadcrumbs
                event_level=logging.ERROR,
            ),
        ],
        traces_sample_rate=settings.SENTRY_TRACES_SAMPLE_RATE,
    )
    _initialized = True
    return True


def capture_exception(
    exception: Exception,
    context: Optional[Dict[str, Any]] = None,
    level: str = "error",
) -> None:
    """
    Capture an exception with additional context.

    Args:
        exception: The exception to capture
        context: Additional context to include (e.g. command, problem digest)
        level: Error level (error, warning, info, etc.)
    """
    settings = config_module.settings
    if not settings.SENTRY_DSN:
        return

    with sentry_sdk.push_scope() as scope:
        if context:
            for key, value in context.items():
                scope.set_context(key, value if isinstance(value, dict) else {"value": value})
        scope.set_tag("environment", settings.ENVIRONMENT)
        scope.set_tag("service", settings.PROJECT_NAME)
        scope.level = level
        sentry_sdk.capture_exception(exception)
