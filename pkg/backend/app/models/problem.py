"""
Lower-level and bilevel problem definitions.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from app.core.exceptions import DimensionMismatchError
from app.models.system import ParametricSystem, check_declared
from app.services.expr import CompiledExpr, Expr


@dataclass(frozen=True)
class ProblemFlags:
    """User assertions echoed into reports, never inferred."""

    convex_in_y: bool = False  # A1': f(x,.) and the h_i(x,.) convex, J affine in y
    locally_bounded: bool = False  # A2: Gamma locally bounded


@dataclass(frozen=True)
class ParametricProblem:
    """``min_y f(x, y) s.t. y in Gamma(x)``."""

    sys: ParametricSystem
    f: Expr
    flags: ProblemFlags = ProblemFlags()
    name: str = ""

    def __post_init__(self):
        check_declared(self.f, self.sys.n, self.sys.m)

    @property
    def n(self) -> int:
        return self.sys.n

    @property
    def m(self) -> int:
        return self.sys.m

    @cached_property
    def objective(self) -> CompiledExpr:
        return CompiledExpr(self.f, self.sys.m)


@dataclass(frozen=True)
class Box:
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper):
            raise DimensionMismatchError("box bounds of different lengths")
        for lo, hi in zip(self.lower, self.upper):
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ValueError(f"box bounds must be finite and ordered, got [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= np.asarray(self.lower) - tol) and np.all(x <= np.asarray(self.upper) + tol))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


@dataclass(frozen=True)
class BilevelProblem:
    """``min_x {F(x, y) | x in X, y in S(x)}`` with ``X`` a box."""

    F: Expr
    box: Box
    lower: ParametricProblem

    def __post_init__(self):
        check_declared(self.F, self.lower.n, self.lower.m)
        if self.box.dim != self.lower.n:
            raise DimensionMismatchError(
                f"box of dimension {self.box.dim} for {self.lower.n} parameters"
            )

    @cached_property
    def upper(self) -> CompiledExpr:
        return CompiledExpr(self.F, self.lower.m)
