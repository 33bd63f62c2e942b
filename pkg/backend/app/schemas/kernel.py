"""
Certificates produced by the linear-algebra kernel.
"""
from typing import Dict, List

from pydantic import BaseModel, Field


class PLDCertificate(BaseModel):
    """Nontrivial vanishing combination: alphas on the nonnegative side, betas free."""

    alphas: Dict[str, float] = Field(default_factory=dict)
    betas: Dict[str, float] = Field(default_factory=dict)
    norm: float = 1.0
    residual: float = 0.0


class CaratheodoryResult(BaseModel):
    kept_positive_labels: List[str]
    coefficients: Dict[str, float]
    residual: float
