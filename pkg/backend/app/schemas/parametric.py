"""
Marginal-function scans and solution-map checks.
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator

from app.schemas.geometry import IscProbe, RegularityProbe


class GridAxis(BaseModel):
    lo: float
    hi: float
    steps: int

    @field_validator("steps")
    @classmethod
    def steps_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("an axis needs at least one node")
        return v


class GridSpec(BaseModel):
    axes: List[GridAxis]

    @property
    def size(self) -> int:
        total = 1
        for axis in self.axes:
            total *= axis.steps
        return total

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """``"lo:hi:steps[,lo:hi:steps...]"``"""
        axes = []
        for chunk in text.split(","):
            lo, hi, steps = chunk.strip().split(":")
            axes.append(GridAxis(lo=float(lo), hi=float(hi), steps=int(steps)))
        return cls(axes=axes)


class Hypotheses(BaseModel):
    """Which assumptions were asserted by the user and which were probed."""

    convex_in_y_asserted: bool
    locally_bounded_asserted: bool
    probed: Dict[str, Optional[str]] = Field(default_factory=dict)


class LowerSolution(BaseModel):
    x: List[float]
    phi: float
    representatives: List[List[float]]
    empty: bool
    restarts: int = 0


class GridNode(BaseModel):
    index: List[int]
    x: List[float]
    phi: float
    representatives: List[List[float]]
    restarts: int = 0


class GridScan(BaseModel):
    grid: GridSpec
    nodes: List[GridNode]
    tolerances: Dict[str, Any] = Field(default_factory=dict)


class Discontinuity(BaseModel):
    left: List[float]
    right: List[float]
    location: List[float]
    jump: float
    final_slope: float


class LipschitzReport(BaseModel):
    node_slopes: List[Optional[float]]
    discontinuities: List[Discontinuity]
    modulus: float
    window: Optional[List[List[float]]] = None
    lipschitz_on_dom: bool
    hypotheses: Optional[Hypotheses] = None


class LscVerdict(str, Enum):
    LIKELY = "likely_lower_semicontinuous"
    LIKELY_NOT = "likely_not_lower_semicontinuous"
    INCONCLUSIVE = "inconclusive"


class SMapReport(BaseModel):
    rreg_probe: RegularityProbe
    isc_probes: List[IscProbe]
    lsc_verdict: LscVerdict
    solutions: List[List[float]]
    phi: float
    hypotheses: Hypotheses
