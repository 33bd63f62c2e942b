"""
Dependencies for API endpoints.
"""
from app.core.config import AnalysisConfig, get_analysis_config
from app.schemas.analysis import AnalysisRequest
from app.services.problems import LoadedProblem, build_problem, load_problem


def request_problem(body: AnalysisRequest) -> LoadedProblem:
    if body.problem is not None:
        return build_problem(body.problem, source="request")
    return load_problem(body.problem_name)


def request_config(body: AnalysisRequest) -> AnalysisConfig:
    overrides = body.overrides.model_dump(exclude_none=True)
    for key in ("radii", "kappa_grid"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    return get_analysis_config(**overrides)
