"""
Dense two-phase primal simplex with Bland's rule.

Solves ``min c @ x  s.t.  A x = b, x >= 0`` on small dense instances. Bland's
rule (lowest eligible index enters, lowest basic index leaves on ratio ties)
makes every run cycle-free and reproducible.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from app.core.exceptions import LPFailure
from app.core.metrics import track_lp


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    status: LPStatus
    x: Optional[np.ndarray] = None
    objective: float = float("nan")
    infeasibility: float = 0.0
    iterations: int = 0
    basis: List[int] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status != LPStatus.INFEASIBLE


class SimplexTableau:
    """Tableau ``[A | b]`` with the reduced-cost row stored last."""

    def __init__(self, table: np.ndarray, basis: List[int], tol: float, max_iter: int):
        self.table = table
        self.basis = basis
        self.tol = tol
        self.max_iter = max_iter
        self.iterations = 0

    def pivot(self, row: int, col: int) -> None:
        t = self.table
        t[row] /= t[row, col]
        factors = t[:, col].copy()
        factors[row] = 0.0
        t -= np.outer(factors, t[row])
        t[:, col] = 0.0
        t[row, col] = 1.0
        self.basis[row] = col

    def run(self, allowed: int) -> LPStatus:
        """Iterate until optimal or unbounded; only columns ``< allowed`` may enter."""
        t = self.table
        rows = t.shape[0] - 1
        while True:
            costs = t[-1, :allowed]
            eligible = np.flatnonzero(costs < -self.tol)
            if eligible.size == 0:
                return LPStatus.OPTIMAL
            col = int(eligible[0])
            column = t[:rows, col]
            positive = np.flatnonzero(column > self.tol)
            if positive.size == 0:
                return LPStatus.UNBOUNDED
            ratios = t[positive, -1] / column[positive]
            best = ratios.min()
            ties = positive[ratios <= best + self.tol * max(1.0, abs(best))]
            row = int(min(ties, key=lambda r: self.basis[r]))
            self.pivot(row, col)
            self.iterations += 1
            if self.iterations > self.max_iter:
                raise LPFailure("simplex iteration limit reached", iterations=self.iterations)


def solve_lp(
    c: np.ndarray,
    A_eq: np.ndarray,
    b_eq: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 5000,
) -> LPResult:
    """Two-phase simplex on ``min c@x, A_eq x = b_eq, x >= 0``."""
    A = np.array(A_eq, dtype=float, copy=True)
    b = np.array(b_eq, dtype=float, copy=True).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    rows, cols = A.shape if A.size else (b.shape[0], c.shape[0])
    A = A.reshape(rows, cols)

    if rows == 0:
        if np.any(c < -tol):
            track_lp(LPStatus.UNBOUNDED.value)
            return LPResult(LPStatus.UNBOUNDED)
        track_lp(LPStatus.OPTIMAL.value)
        return LPResult(LPStatus.OPTIMAL, np.zeros(cols), 0.0)

    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    # phase 1: artificial identity block, minimise the sum of artificials
    table = np.zeros((rows + 1, cols + rows + 1))
    table[:rows, :cols] = A
    table[:rows, cols:cols + rows] = np.eye(rows)
    table[:rows, -1] = b
    table[-1, :cols] = -A.sum(axis=0)
    table[-1, -1] = -b.sum()
    tableau = SimplexTableau(table, list(range(cols, cols + rows)), tol, max_iter)
    tableau.run(allowed=cols)

    infeasibility = -float(table[-1, -1])
    scale = max(1.0, float(np.abs(b).max()))
    if infeasibility > tol * scale:
        track_lp(LPStatus.INFEASIBLE.value)
        return LPResult(
            LPStatus.INFEASIBLE, infeasibility=infeasibility, iterations=tableau.iterations
        )

    # drive artificials out of the basis; rows without a usable pivot are redundant
    redundant = []
    for r in range(rows):
        if tableau.basis[r] >= cols:
            candidates = np.flatnonzero(np.abs(table[r, :cols]) > tol)
            if candidates.size:
                tableau.pivot(r, int(candidates[0]))
            else:
                redundant.append(r)
    keep = [r for r in range(rows) if r not in redundant]

    # phase 2 on the original columns
    phase2 = np.zeros((len(keep) + 1, cols + 1))
    phase2[:-1, :cols] = table[keep, :cols]
    phase2[:-1, -1] = table[keep, -1]
    phase2[-1, :cols] = c
    basis = [tableau.basis[r] for r in keep]
    for r, j in enumerate(basis):
        if phase2[-1, j] != 0.0:
            phase2[-1] -= phase2[-1, j] * phase2[r]
    second = SimplexTableau(phase2, basis, tol, max_iter)
    second.iterations = tableau.iterations
    status = second.run(allowed=cols)
    if status == LPStatus.UNBOUNDED:
        track_lp(status.value)
        return LPResult(status, iterations=second.iterations, basis=list(basis))

    x = np.zeros(cols)
    for r, j in enumerate(second.basis):
        x[j] = max(phase2[r, -1], 0.0)
    track_lp(status.value)
    return LPResult(
        status,
        x=x,
        objective=float(c @ x),
        infeasibility=infeasibility,
        iterations=second.iterations,
        basis=list(second.basis),
    )


def find_feasible(A_eq: np.ndarray, b_eq: np.ndarray, tol: float = 1e-8) -> LPResult:
    """Phase 1 only: any ``x >= 0`` with ``A_eq x = b_eq``."""
    cols = np.asarray(A_eq).shape[1] if np.asarray(A_eq).size else 0
    return solve_lp(np.zeros(cols), A_eq, b_eq, tol=tol)
