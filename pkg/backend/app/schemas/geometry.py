"""
Residuals, projections and regularity estimates.
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.schemas.cq import Point, Restriction


class Residual(BaseModel):
    value: float
    argmax_constraint: Optional[int] = None


class SolverTrace(BaseModel):
    restarts: int
    stationarity: float
    candidates: int = 0


class Projection(BaseModel):
    y_star: Optional[List[float]] = None
    distance: float
    empty: bool = False
    trace: SolverTrace


class RegularityVerdict(str, Enum):
    CONSISTENT = "consistent_with_R_regular"
    LIKELY_NOT = "likely_not_R_regular"
    INCONCLUSIVE = "inconclusive"


class RadiusRecord(BaseModel):
    radius: float
    samples: int
    omega_hits: int
    ratios: int
    empty_images: int
    max_ratio: float
    argmax: Optional[Point] = None


class RegularityProbe(BaseModel):
    center: Point
    records: List[RadiusRecord]
    verdict: RegularityVerdict
    restriction: Restriction
    omega_hit_rate: float
    notes: List[str] = Field(default_factory=list)
    tolerances: Dict[str, Any] = Field(default_factory=dict)

    def kappa(self, radius: float) -> float:
        for record in self.records:
            if record.radius == radius:
                return record.max_ratio
        raise KeyError(radius)


class MultiplierProbe(BaseModel):
    exists: bool
    multipliers: Optional[Dict[str, float]] = None
    bound: float
    l1_norm: Optional[float] = None
    stationarity_residual: Optional[float] = None


class IscVerdict(str, Enum):
    LIKELY = "likely_inner_semicontinuous"
    LIKELY_NOT = "likely_not_inner_semicontinuous"
    INCONCLUSIVE = "inconclusive"


class IscRecord(BaseModel):
    radius: float
    samples: int
    omega_hits: int
    max_distance: float
    argmax_x: Optional[List[float]] = None


class IscProbe(BaseModel):
    center: Point
    records: List[IscRecord]
    verdict: IscVerdict
    restriction: Restriction
    tolerances: Dict[str, Any] = Field(default_factory=dict)


class UniformScan(BaseModel):
    kappa_uniform: float
    probes: List[RegularityProbe]
    diverging_points: List[Point]


class MultiplierBoundRecord(BaseModel):
    radius: float
    samples: int
    probed: int
    max_multiplier_norm: float


class MultiplierBoundScan(BaseModel):
    center: Point
    records: List[MultiplierBoundRecord]
    verdict: RegularityVerdict
    tolerances: Dict[str, Any] = Field(default_factory=dict)
