"""
FastAPI application for regkit.
"""
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request, status
from fastapi.responses import JSONResponse

from app.core.config import settings
from app.core.exceptions import RegKitError
from app.core.logging import configure_logging, get_logger
from app.core.metrics import metrics_router
from app.core.monitoring import capture_exception, init_sentry
from app.api.responses import CanonicalJSONResponse
from app.api.v1.api import api_router as v1_router

logger = get_logger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info("Starting regkit API", extra={"version": settings.VERSION})
    if init_sentry():
        logger.info("Sentry initialized")
    yield
    logger.info("Stopping regkit API")


def create_application() -> FastAPI:
    """
    Create and configure the FastAPI application.
    """
    configure_logging()
    app = FastAPI(
        title=settings.PROJECT_NAME,
        description="Numerical verification of constraint qualifications, R-regularity and bilevel calmness",
        version=settings.VERSION,
        openapi_url=f"{settings.API_V1_STR}/openapi.json",
        docs_url="/docs",
        redoc_url="/redoc",
        lifespan=lifespan,
    )

    setup_routers(app)
    setup_exception_handlers(app)
    return app


def setup_routers(app: FastAPI) -> None:
    """Configure API routes."""
    app.include_router(v1_router, prefix=settings.API_V1_STR)
    app.include_router(metrics_router, tags=["metrics"])

    @app.get("/health", status_code=status.HTTP_200_OK, tags=["system"])
    async def health_check():
        return {"status": "ok", "environment": settings.ENVIRONMENT, "version": settings.VERSION}


def setup_exception_handlers(app: FastAPI) -> None:
    """Configure exception handlers."""

    @app.exception_handler(RegKitError)
    async def regkit_exception_handler(request: Request, exc: RegKitError):
        logger.warning("analysis rejected", extra={"error": exc.code, "path": request.url.path})
        return CanonicalJSONResponse(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, content=exc.to_dict())

    @app.exception_handler(Exception)
    async def global_exception_handler(request: Request, exc: Exception):
        logger.exception("Unhandled exception")
        capture_exception(exc, context={"path": request.url.path})
        return JSONResponse(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            content={"detail": "Internal server error"},
        )


app = create_application()
