"""
Analysis endpoints.

Every POST takes an ``AnalysisRequest`` and returns the same ``RunReport``
envelope the CLI prints. Analyses are CPU bound, so handlers are plain
functions run in the threadpool.
"""
from typing import List

from fastapi import APIRouter

from app.api.deps import request_config, request_problem
from app.api.responses import CanonicalJSONResponse
from app.schemas.analysis import AnalysisRequest, BundledProblem
from app.schemas.report import RunReport
from app.services.problems import bundled_problems, load_problem
from app.services.runner import run_analysis

router = APIRouter()


def _run(command: str, body: AnalysisRequest) -> CanonicalJSONResponse:
    loaded = request_problem(body)
    report = run_analysis(command, loaded, body.options, request_config(body), argv=[command, loaded.name])
    return CanonicalJSONResponse(content=report)


@router.get("/problems", response_model=List[BundledProblem])
def list_problems():
    """Bundled example problems."""
    out = []
    for name in bundled_problems():
        loaded = load_problem(name)
        out.append(
            BundledProblem(
                name=name,
                description=loaded.document.description,
                n=loaded.document.dims.n,
                m=loaded.document.dims.m,
                bilevel=loaded.bilevel is not None,
                points=sorted(loaded.document.points),
            )
        )
    return out


@router.post("/check-cq", response_model=RunReport)
def check_cq(body: AnalysisRequest):
    return _run("check-cq", body)


@router.post("/probe-rreg", response_model=RunReport)
def probe_rreg(body: AnalysisRequest):
    return _run("probe-rreg", body)


@router.post("/probe-isc", response_model=RunReport)
def probe_isc(body: AnalysisRequest):
    return _run("probe-isc", body)


@router.post("/probe-smap", response_model=RunReport)
def probe_smap(body: AnalysisRequest):
    return _run("probe-smap", body)


@router.post("/probe-multipliers", response_model=RunReport)
def probe_multipliers(body: AnalysisRequest):
    return _run("probe-multipliers", body)


@router.post("/uniform-scan", response_model=RunReport)
def uniform_scan(body: AnalysisRequest):
    return _run("uniform-scan", body)


@router.post("/scan", response_model=RunReport)
def scan(body: AnalysisRequest):
    return _run("scan", body)


@router.post("/solve-opt", response_model=RunReport)
def solve_opt(body: AnalysisRequest):
    return _run("solve-opt", body)


@router.post("/calmness", response_model=RunReport)
def calmness(body: AnalysisRequest):
    return _run("calmness", body)


@router.post("/existence", response_model=RunReport)
def existence(body: AnalysisRequest):
    return _run("existence", body)
