"""
Prometheus metrics for analysis runs and the inner solvers.
"""
import time
from contextlib import contextmanager
from typing import Iterator

from fastapi import APIRouter
from prometheus_client import CONTENT_TYPE_LATEST, Counter, Histogram, generate_latest
from starlette.responses import Response

metrics_router = APIRouter()


@metrics_router.get("/metrics", response_class=Response)
async def metrics():
    """Expose Prometheus metrics."""
    return Response(content=generate_latest(), media_type=CONTENT_TYPE_LATEST)


ANALYSIS_RUNS = Counter(
    "regkit_analysis_runs_total",
    "Analyses executed",
    ["kind", "outcome"],
)

ANALYSIS_DURATION = Histogram(
    "regkit_analysis_duration_seconds",
    "Wall time of one analysis",
    ["kind"],
    buckets=[0.01, 0.1, 0.5, 1.0, 5.0, 15.0, 60.0, 180.0, 600.0],
)

SOLVER_CALLS = Counter(
    "regkit_solver_calls_total",
    "Inner solver invocations",
    ["kind"],  # projection, lower_level, memo_hit
)

LP_SOLVES = Counter(
    "regkit_lp_solves_total",
    "Simplex solves by terminal status",
    ["status"],
)


def track_solver_call(kind: str) -> None:
    SOLVER_CALLS.labels(kind=kind).inc()


def track_lp(status: str) -> None:
    LP_SOLVES.labels(status=status).inc()


@contextmanager
def track_analysis(kind: str) -> Iterator[None]:
    """Time an analysis and count it by outcome."""
    start = time.perf_counter()
    outcome = "ok"
    try:
        yield
    except Exception:
        outcome = "error"
        raise
    finally:
        ANALYSIS_DURATION.labels(kind=kind).observe(time.perf_counter() - start)
        ANALYSIS_RUNS.labels(kind=kind, outcome=outcome).inc()
