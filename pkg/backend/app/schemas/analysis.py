"""
HTTP request bodies for the analysis endpoints.
"""
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from app.schemas.problem import ProblemFile
from app.schemas.report import RunOptions


class ConfigOverrides(BaseModel):
    radii: Optional[List[float]] = None
    samples_per_radius: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = None
    kappa_grid: Optional[List[float]] = None
    refine_rounds: Optional[int] = Field(default=None, ge=0)


class AnalysisRequest(BaseModel):
    """Either an inline problem file or the name of a bundled problem."""

    problem: Optional[ProblemFile] = None
    problem_name: Optional[str] = None
    options: RunOptions = Field(default_factory=RunOptions)
    overrides: ConfigOverrides = Field(default_factory=ConfigOverrides)

    @model_validator(mode="after")
    def one_problem(self) -> "AnalysisRequest":
        if (self.problem is None) == (self.problem_name is None):
            raise ValueError("give exactly one of 'problem' and 'problem_name'")
        return self


class BundledProblem(BaseModel):
    name: str
    description: str
    n: int
    m: int
    bilevel: bool
    points: List[str]
