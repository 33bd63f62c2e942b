"""
Run envelopes shared by the CLI and the HTTP API.
"""
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field

from app.schemas.cq import CQName, Restriction
from app.schemas.problem import PointSpec


class RunOptions(BaseModel):
    """Per-command options; ``point`` is a named reference point, a comma list or explicit coordinates."""

    point: Optional[Union[str, PointSpec]] = None
    points: List[Union[str, PointSpec]] = Field(default_factory=list)
    cq: CQName = CQName.RCPLD
    omega: Restriction = Restriction.FULL
    grid: Optional[str] = None
    kappa_grid: Optional[List[float]] = None
    refine_rounds: Optional[int] = Field(default=None, ge=0)
    sufficient: bool = False


class RunReport(BaseModel):
    tool_version: str
    seed: int
    tolerances: Dict[str, Any]
    command: List[str]
    input_digest: Optional[str] = None
    payload: Any
    wall_time_s: float


class ReproduceCheck(BaseModel):
    example: str
    name: str
    passed: bool
    detail: str = ""
    payload_digest: Optional[str] = None
    seconds: float = 0.0


class ReproduceReport(BaseModel):
    checks: List[ReproduceCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)
