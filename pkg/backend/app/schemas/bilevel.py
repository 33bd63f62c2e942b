"""
Bilevel analysis reports.
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.schemas.cq import CQReport, Point
from app.schemas.geometry import IscProbe
from app.schemas.parametric import Hypotheses


class OptPessValues(BaseModel):
    x: List[float]
    phi_o: float
    phi_p: float
    empty: bool
    representatives: List[List[float]] = Field(default_factory=list)


class OptimisticSolution(BaseModel):
    x: List[float]
    y: List[float]
    value: float
    incumbents: List[float]
    nodes_evaluated: int
    infeasible_nodes: int


class CalmnessWitness(BaseModel):
    x: List[float]
    y: List[float]
    u: float
    margin: float
    radius: float


class KappaOutcome(str, Enum):
    NO_VIOLATION = "no_violation_on_samples"
    VIOLATION = "violation"


class KappaVerdict(BaseModel):
    kappa: float
    outcome: KappaOutcome
    persistent: bool = False
    violating_radii: List[float] = Field(default_factory=list)
    witness: Optional[CalmnessWitness] = None


class CalmnessVerdict(str, Enum):
    CALM = "calm_on_samples"
    LIKELY_NOT = "likely_not_calm"
    INCONCLUSIVE = "inconclusive"


class CalmnessReport(BaseModel):
    point: Point
    reference_value: float
    kappa_grid: List[float]
    per_kappa: List[KappaVerdict]
    overall: CalmnessVerdict
    kappa_min: Optional[float] = None
    samples_used: Dict[str, int] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)
    tolerances: Dict[str, Any] = Field(default_factory=dict)


class SufficientCondition(BaseModel):
    name: str
    met: bool
    details: List[str] = Field(default_factory=list)


class SufficientConditionsReport(BaseModel):
    point: Point
    conditions: List[SufficientCondition]
    rcpld_s: List[CQReport]
    isc_probe: Optional[IscProbe] = None
    any_met: bool
    hypotheses: Hypotheses


class GraphPointCheck(BaseModel):
    point: Point
    verdict: str


class ExistenceReport(BaseModel):
    x_compact: bool
    x_in_dom: bool
    infeasible_nodes: List[List[float]]
    hypotheses: Hypotheses
    rcpld_s_checks: List[GraphPointCheck]
    pessimistic_x: Optional[List[float]] = None
    pessimistic_y: Optional[List[float]] = None
    pessimistic_value: Optional[float] = None
    single_valued: bool
    all_hypotheses_pass: bool
