"""
Constraint-qualification reports.
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.schemas.kernel import PLDCertificate


class Point(BaseModel):
    x: List[float]
    y: List[float]


class CQName(str, Enum):
    LICQ = "licq"
    MFCQ = "mfcq"
    RCRCQ = "rcrcq"
    RCPLD = "rcpld"
    RCPLD_S = "rcpld_s"


class Verdict(str, Enum):
    HOLDS = "holds"
    HOLDS_ON_SAMPLES = "holds_on_samples"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


class Restriction(str, Enum):
    FULL = "full"
    DOM = "dom"
    CUSTOM = "custom"


class ActiveSet(BaseModel):
    indices: List[int]
    tol_act: float
    point: Point
    residual: float = 0.0
    feasible: bool = True


class SampleCoverage(BaseModel):
    radius: float
    samples: int
    checked: int


class RankWitness(BaseModel):
    """A subset whose rank or dependence changed at a sampled point."""

    subset: List[int]
    radius: float
    sample_index: int
    point: Point
    rank_center: int
    rank_sample: int


class MultiplierSupport(BaseModel):
    support: List[int]
    multipliers: Dict[str, float]
    dependent_at_center: bool
    stable: Optional[bool] = None


class CQCertificate(BaseModel):
    family: List[int] = Field(default_factory=list)
    rank: Optional[int] = None
    pld: Optional[PLDCertificate] = None
    basis: Optional[List[int]] = None
    dependent_subsets: List[List[int]] = Field(default_factory=list)
    witness: Optional[RankWitness] = None
    supports: List[MultiplierSupport] = Field(default_factory=list)


class CQReport(BaseModel):
    cq_name: CQName
    point: Point
    verdict: Verdict
    active_set: List[int]
    certificate: Optional[CQCertificate] = None
    coverage: List[SampleCoverage] = Field(default_factory=list)
    restriction: Restriction = Restriction.FULL
    warnings: List[str] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)
    tolerances: Dict[str, Any] = Field(default_factory=dict)
