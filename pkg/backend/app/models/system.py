"""
Parametric constraint systems.

Constraint labels follow the usual indexing: inequalities are ``1..l``,
equalities ``l+1..p`` and an optional value-function constraint
``h0(x, y) = f(x, y) - phi(x)`` carries label ``0``.
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import DimensionMismatchError, VariableIndexError
from app.services.expr import CompiledExpr, Expr, has_division, variables

VALUE_LABEL = 0


class ValueMode(str, Enum):
    INEQ = "h0_as_ineq"
    EQ = "h0_as_eq"


def check_declared(e: Expr, n: int, m: int) -> None:
    for axis, index in variables(e):
        bound = n if axis == "x" else m
        if not 1 <= index <= bound:
            raise VariableIndexError(axis, index, bound)


@dataclass(frozen=True)
class ValueFunctionConstraint:
    """``h0(x, y) = f(x, y) - phi(x)`` with ``phi`` re-solved per parameter.

    ``phi_ref`` is the optimal value at the reference parameter ``x_ref``. The
    y-gradient of ``h0`` is exactly ``grad_y f``.
    """

    f: Expr
    mode: ValueMode
    x_ref: Tuple[float, ...]
    phi_ref: float
    phi: Callable[[np.ndarray], float] = field(compare=False, repr=False)
    solutions: Optional[Callable[[np.ndarray], List[np.ndarray]]] = field(
        default=None, compare=False, repr=False
    )


@dataclass(frozen=True)
class ParametricSystem:
    """The constraint family defining ``Gamma(x) = {y : h_i(x,y) <= 0 (I), h_i(x,y) = 0 (J)}``."""

    n: int
    m: int
    ineq: Tuple[Expr, ...] = ()
    eq: Tuple[Expr, ...] = ()
    value_constraint: Optional[ValueFunctionConstraint] = None

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise DimensionMismatchError("dimensions must be nonnegative")
        object.__setattr__(self, "ineq", tuple(self.ineq))
        object.__setattr__(self, "eq", tuple(self.eq))
        for e in self.ineq + self.eq:
            check_declared(e, self.n, self.m)
        if self.value_constraint is not None:
            check_declared(self.value_constraint.f, self.n, self.m)

    @property
    def ell(self) -> int:
        return len(self.ineq)

    @property
    def p(self) -> int:
        return len(self.ineq) + len(self.eq)

    @property
    def ineq_labels(self) -> List[int]:
        labels = list(range(1, self.ell + 1))
        if self.value_constraint is not None and self.value_constraint.mode == ValueMode.INEQ:
            labels.insert(0, VALUE_LABEL)
        return labels

    @property
    def eq_labels(self) -> List[int]:
        labels = list(range(self.ell + 1, self.p + 1))
        if self.value_constraint is not None and self.value_constraint.mode == ValueMode.EQ:
            labels.insert(0, VALUE_LABEL)
        return labels

    @property
    def labels(self) -> List[int]:
        return sorted(self.ineq_labels + self.eq_labels)

    def expression(self, label: int) -> Expr:
        if label == VALUE_LABEL:
            if self.value_constraint is None:
                raise KeyError(label)
            return self.value_constraint.f
        if 1 <= label <= self.ell:
            return self.ineq[label - 1]
        if self.ell < label <= self.p:
            return self.eq[label - self.ell - 1]
        raise KeyError(label)

    @cached_property
    def compiled(self) -> Dict[int, CompiledExpr]:
        return {label: CompiledExpr(self.expression(label), self.m) for label in self.labels}

    @property
    def has_division(self) -> bool:
        exprs = list(self.ineq) + list(self.eq)
        if self.value_constraint is not None:
            exprs.append(self.value_constraint.f)
        return any(has_division(e) for e in exprs)

    def with_value_constraint(self, vc: ValueFunctionConstraint) -> "ParametricSystem":
        return ParametricSystem(self.n, self.m, self.ineq, self.eq, vc)

    def base(self) -> "ParametricSystem":
        return ParametricSystem(self.n, self.m, self.ineq, self.eq)

    def check_point(self, x: Sequence[float], y: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if x.shape[0] != self.n or y.shape[0] != self.m:
            raise DimensionMismatchError(
                f"point of dimensions ({x.shape[0]}, {y.shape[0]}) for a system over ({self.n}, {self.m})"
            )
        return x, y

    def value(self, label: int, x: np.ndarray, y: np.ndarray, phi: Optional[float] = None) -> float:
        """``h_label(x, y)``; for label 0 ``phi`` may be supplied to skip a re-solve."""
        raw = self.compiled[label].value(x, y)
        if label == VALUE_LABEL:
            offset = self.value_constraint.phi(x) if phi is None else phi
            return raw - offset
        return raw

    def values(self, x: np.ndarray, y: np.ndarray, phi: Optional[float] = None) -> Dict[int, float]:
        return {label: self.value(label, x, y, phi) for label in self.labels}

    def grad_y(self, label: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.compiled[label].grad_y(x, y)

    def gradients(self, labels: Sequence[int], x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Rows are ``grad_y h_label(x, y)`` in the order of ``labels``."""
        if not labels:
            return np.zeros((0, self.m))
        return np.vstack([self.grad_y(label, x, y) for label in labels])
