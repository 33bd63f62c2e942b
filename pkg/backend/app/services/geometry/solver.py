"""
Minimisation over a slice ``Gamma(x)`` at fixed parameter ``x``.

Used for projections onto ``Gamma(x)`` and for lower-level solves. For
``m <= 2`` a vectorised grid over a box around the center is refined around
the best cells; otherwise multistart. Every candidate is then polished:

1. Newton descent on the quadratic-penalty merit with an increasing penalty,
2. Gauss-Newton restoration onto the violated constraints,
3. a Newton-KKT step on the nearly active set, kept only if it stays feasible
   and does not increase the objective.
"""
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import AnalysisConfig
from app.core.logging import get_logger
from app.models.system import VALUE_LABEL, ParametricSystem
from app.services.expr import CompiledExpr

logger = get_logger(__name__)

GRID_PENALTY = 1e6
CANDIDATES_PER_LIST = 4
LOCAL_GRID_HALF = 10
NEWTON_ITERATIONS = 40
RESTORE_ITERATIONS = 20
KKT_ITERATIONS = 10
RESTORE_TARGET = 1e-13
ARMIJO = 1e-4


def salt_for(*arrays: np.ndarray) -> int:
    """A stable per-input salt for the solver RNG."""
    blob = b"".join(np.ascontiguousarray(a, dtype=float).tobytes() for a in arrays)
    return zlib.crc32(blob)


class SliceObjective(ABC):
    """An objective in ``y`` alone, minimised over the slice."""

    @abstractmethod
    def value(self, y: np.ndarray) -> float:
        ...

    @abstractmethod
    def batch(self, Y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def grad(self, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def hess(self, y: np.ndarray) -> np.ndarray:
        ...


class DistanceObjective(SliceObjective):
    """``||y - nu||^2``."""

    def __init__(self, nu: np.ndarray):
        self.nu = np.asarray(nu, dtype=float)

    def value(self, y: np.ndarray) -> float:
        d = y - self.nu
        return float(d @ d)

    def batch(self, Y: np.ndarray) -> np.ndarray:
        return np.sum((Y - self.nu) ** 2, axis=1)

    def grad(self, y: np.ndarray) -> np.ndarray:
        return 2.0 * (y - self.nu)

    def hess(self, y: np.ndarray) -> np.ndarray:
        return 2.0 * np.eye(self.nu.shape[0])


class ExpressionObjective(SliceObjective):
    """A compiled expression ``f(x, .)`` at fixed ``x``."""

    def __init__(self, compiled: CompiledExpr, x: np.ndarray):
        self.compiled = compiled
        self.x = x

    def value(self, y: np.ndarray) -> float:
        return self.compiled.value(self.x, y)

    def batch(self, Y: np.ndarray) -> np.ndarray:
        return self.compiled.batch(self.x, Y)

    def grad(self, y: np.ndarray) -> np.ndarray:
        return self.compiled.grad_y(self.x, y)

    def hess(self, y: np.ndarray) -> np.ndarray:
        return self.compiled.hess_y(self.x, y)


class SliceConstraints:
    """The constraints of ``sys`` with ``x`` (and ``phi(x)`` for label 0) frozen."""

    def __init__(self, sys: ParametricSystem, x: np.ndarray, cfg: AnalysisConfig, phi: Optional[float] = None):
        self.sys = sys
        self.x = x
        self.cfg = cfg
        self.ineq = sys.ineq_labels
        self.eq = sys.eq_labels
        if sys.value_constraint is not None and phi is None:
            phi = sys.value_constraint.phi(x)
        self.phi = phi

    def _offset(self, label: int) -> float:
        return self.phi if label == VALUE_LABEL else 0.0

    def value(self, label: int, y: np.ndarray) -> float:
        return self.sys.compiled[label].value(self.x, y) - self._offset(label)

    def batch(self, label: int, Y: np.ndarray) -> np.ndarray:
        return self.sys.compiled[label].batch(self.x, Y) - self._offset(label)

    def grad(self, label: int, y: np.ndarray) -> np.ndarray:
        return self.sys.grad_y(label, self.x, y)

    def hess(self, label: int, y: np.ndarray) -> np.ndarray:
        return self.sys.compiled[label].hess_y(self.x, y)

    def residual(self, y: np.ndarray) -> float:
        worst = 0.0
        for label in self.ineq:
            worst = max(worst, self.value(label, y))
        for label in self.eq:
            worst = max(worst, abs(self.value(label, y)))
        return worst if np.isfinite(worst) else np.inf

    def batch_residual(self, Y: np.ndarray) -> np.ndarray:
        worst = np.zeros(Y.shape[0])
        with np.errstate(all="ignore"):
            for label in self.ineq:
                worst = np.maximum(worst, self.batch(label, Y))
            for label in self.eq:
                worst = np.maximum(worst, np.abs(self.batch(label, Y)))
        return np.where(np.isfinite(worst), worst, np.inf)

    def tolerance(self, label: int) -> float:
        return self.cfg.solution_value_tol if label == VALUE_LABEL else self.cfg.tol_feas

    def feasible(self, y: np.ndarray) -> bool:
        try:
            for label in self.ineq:
                if not self.value(label, y) <= self.tolerance(label):
                    return False
            for label in self.eq:
                if not abs(self.value(label, y)) <= self.tolerance(label):
                    return False
        except ZeroDivisionError:
            return False
        return True


@dataclass
class SliceResult:
    y: Optional[np.ndarray]
    value: float
    feasible: List[Tuple[np.ndarray, float]] = field(default_factory=list)
    restarts: int = 0
    stationarity: float = float("inf")

    @property
    def empty(self) -> bool:
        return self.y is None


class SliceSolver:
    """Minimise an objective over ``Gamma(x)`` for one fixed ``x``."""

    def __init__(
        self,
        sys: ParametricSystem,
        x: Sequence[float],
        cfg: AnalysisConfig,
        phi: Optional[float] = None,
    ):
        self.sys = sys
        self.x = np.asarray(x, dtype=float).reshape(-1)
        self.cfg = cfg
        self.m = sys.m
        self.constraints = SliceConstraints(sys, self.x, cfg, phi)

    # -- scoring -----------------------------------------------------------

    def _score(self, objective: SliceObjective, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        with np.errstate(all="ignore"):
            obj = objective.batch(Y)
            res = self.constraints.batch_residual(Y)
            score = obj + GRID_PENALTY * res
        score = np.where(np.isfinite(score), score, np.inf)
        return score, res

    @staticmethod
    def _spread_top(values: np.ndarray, Y: np.ndarray, k: int, min_sep: float) -> List[int]:
        picks: List[int] = []
        for i in np.argsort(values, kind="stable"):
            if not np.isfinite(values[i]):
                break
            if all(np.max(np.abs(Y[i] - Y[j])) > min_sep for j in picks):
                picks.append(int(i))
            if len(picks) == k:
                break
        return picks

    def _refine(self, objective: SliceObjective, y: np.ndarray, step: float) -> np.ndarray:
        offsets = np.arange(-LOCAL_GRID_HALF, LOCAL_GRID_HALF + 1, dtype=float)
        for _ in range(self.cfg.refine_levels):
            step /= 10.0
            axes = [y[j] + step * offsets for j in range(self.m)]
            Y = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.m)
            score, _ = self._score(objective, Y)
            best = int(np.argmin(score))
            if np.isfinite(score[best]):
                y = Y[best]
        return y

    def _grid_starts(self, objective: SliceObjective, center: np.ndarray) -> List[np.ndarray]:
        half = self.cfg.box
        count = self.cfg.grid_points
        axes = [np.linspace(c - half, c + half, count) for c in center]
        Y = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.m)
        score, res = self._score(objective, Y)
        step = 2.0 * half / max(count - 1, 1)
        picks = self._spread_top(score, Y, CANDIDATES_PER_LIST, 2.0 * step)
        for i in self._spread_top(res, Y, CANDIDATES_PER_LIST, 2.0 * step):
            if i not in picks:
                picks.append(i)
        return [self._refine(objective, Y[i].copy(), step) for i in picks]

    def _random_starts(self, center: np.ndarray, count: int, salt: int) -> List[np.ndarray]:
        rng = np.random.default_rng([self.cfg.seed, salt])
        starts = [center.copy()]
        for _ in range(count - 1):
            starts.append(center + self.cfg.box * rng.uniform(-1.0, 1.0, self.m))
        return starts

    # -- polish ------------------------------------------------------------

    def _merit(self, objective: SliceObjective, y: np.ndarray, rho: float, derivatives: bool = True):
        try:
            val = objective.value(y)
            if not derivatives:
                for label in self.constraints.ineq:
                    h = self.constraints.value(label, y)
                    if h > 0:
                        val += rho * h * h
                for label in self.constraints.eq:
                    h = self.constraints.value(label, y)
                    val += rho * h * h
                return val if np.isfinite(val) else np.inf
            g = objective.grad(y)
            H = objective.hess(y)
            for label in self.constraints.ineq + self.constraints.eq:
                h = self.constraints.value(label, y)
                if label in self.constraints.ineq and h <= 0:
                    continue
                dh = self.constraints.grad(label, y)
                val += rho * h * h
                g = g + 2.0 * rho * h * dh
                H = H + 2.0 * rho * (np.outer(dh, dh) + h * self.constraints.hess(label, y))
        except ZeroDivisionError:
            return np.inf, None, None
        if not (np.isfinite(val) and np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            return np.inf, None, None
        return val, g, H

    @staticmethod
    def _newton_direction(g: np.ndarray, H: np.ndarray) -> np.ndarray:
        w, V = np.linalg.eigh(0.5 * (H + H.T))
        floor = 1e-8 * max(1.0, float(np.max(np.abs(w))))
        w = np.maximum(np.abs(w), floor)
        return -V @ ((V.T @ g) / w)

    def _newton(self, objective: SliceObjective, y: np.ndarray, rho: float) -> Tuple[np.ndarray, float]:
        gnorm = np.inf
        for _ in range(NEWTON_ITERATIONS):
            val, g, H = self._merit(objective, y, rho)
            if g is None:
                break
            gnorm = float(np.linalg.norm(g))
            if gnorm <= self.cfg.stationarity_tol:
                break
            d = self._newton_direction(g, H)
            slope = float(g @ d)
            if slope >= 0:
                d, slope = -g, -gnorm * gnorm
            t = 1.0
            while t > 1e-12:
                trial = y + t * d
                if self._merit(objective, trial, rho, derivatives=False) <= val + ARMIJO * t * slope:
                    break
                t *= 0.5
            else:
                break
            y = trial
            if np.linalg.norm(t * d) <= 1e-15 * (1.0 + np.linalg.norm(y)):
                break
        return y, gnorm

    def _restore(self, y: np.ndarray) -> np.ndarray:
        c = self.constraints
        for _ in range(RESTORE_ITERATIONS):
            try:
                labels, values = [], []
                for label in c.ineq:
                    h = c.value(label, y)
                    if h > (c.tolerance(label) if label == VALUE_LABEL else 0.0):
                        labels.append(label)
                        values.append(h)
                worst = max(values, default=0.0)
                for label in c.eq:
                    h = c.value(label, y)
                    labels.append(label)
                    values.append(h)
                    worst = max(worst, abs(h))
                if worst <= RESTORE_TARGET or not labels:
                    break
                G = self.sys.gradients(labels, self.x, y)
                step, *_ = np.linalg.lstsq(G, -np.asarray(values), rcond=None)
            except ZeroDivisionError:
                break
            if not np.all(np.isfinite(step)):
                break
            y = y + step
            if np.linalg.norm(step) <= 1e-16 * (1.0 + np.linalg.norm(y)):
                break
        return y

    def _kkt_refine(self, objective: SliceObjective, y: np.ndarray) -> np.ndarray:
        c = self.constraints
        try:
            base_value = objective.value(y)
            active = [label for label in c.ineq if c.value(label, y) >= -self.cfg.tol_act] + list(c.eq)
        except ZeroDivisionError:
            return y
        ineq_active = set(active) & set(c.ineq)
        for _ in range(len(active) + 1):
            candidate = self._kkt_iterate(objective, y, active)
            if candidate is None:
                return y
            z, lam = candidate
            negative = [(lam[i], label) for i, label in enumerate(active) if label in ineq_active and lam[i] < -1e-8]
            if negative:
                active.remove(min(negative)[1])
                continue
            try:
                if c.feasible(z) and objective.value(z) <= base_value + 1e-12 * (1.0 + abs(base_value)):
                    return z
            except ZeroDivisionError:
                pass
            return y
        return y

    def _kkt_iterate(self, objective: SliceObjective, y: np.ndarray, active: List[int]):
        c = self.constraints
        k = len(active)
        lam = np.zeros(k)
        z = y.copy()
        try:
            for _ in range(KKT_ITERATIONS):
                H = objective.hess(z)
                for i, label in enumerate(active):
                    if lam[i] != 0.0:
                        H = H + lam[i] * c.hess(label, z)
                g = objective.grad(z)
                G = self.sys.gradients(active, self.x, z)
                h = np.array([c.value(label, z) for label in active])
                K = np.zeros((self.m + k, self.m + k))
                K[: self.m, : self.m] = H
                K[: self.m, self.m :] = G.T
                K[self.m :, : self.m] = G
                rhs = np.concatenate([-g, -h])
                sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
                if not np.all(np.isfinite(sol)):
                    return None
                d, lam = sol[: self.m], sol[self.m :]
                z = z + d
                if np.linalg.norm(d) <= 1e-14 * (1.0 + np.linalg.norm(z)):
                    break
        except ZeroDivisionError:
            return None
        return z, lam

    def polish(self, objective: SliceObjective, y0: np.ndarray) -> Tuple[np.ndarray, float]:
        y = np.asarray(y0, dtype=float).copy()
        rho = self.cfg.penalty_start
        stationarity = np.inf
        for _ in range(self.cfg.penalty_rounds):
            y, stationarity = self._newton(objective, y, rho)
            rho *= self.cfg.penalty_factor
        y = self._restore(y)
        y = self._kkt_refine(objective, y)
        return y, stationarity

    # -- driver ------------------------------------------------------------

    def minimize(
        self,
        objective: SliceObjective,
        center: Sequence[float],
        seeds: Sequence[np.ndarray] = (),
        starts: Optional[int] = None,
    ) -> SliceResult:
        center = np.asarray(center, dtype=float).reshape(-1)
        if self.m <= 2:
            initial = self._grid_starts(objective, center)
        else:
            count = starts or min(8 * self.m, 64)
            initial = self._random_starts(center, count, salt_for(self.x, center))
        initial.extend(np.asarray(s, dtype=float) for s in seeds)

        feasible: List[Tuple[np.ndarray, float]] = []
        best_stationarity = np.inf
        for y0 in initial:
            y, stationarity = self.polish(objective, y0)
            if not self.constraints.feasible(y):
                continue
            try:
                value = objective.value(y)
            except ZeroDivisionError:
                continue
            if np.isfinite(value):
                feasible.append((y, value))
                best_stationarity = min(best_stationarity, stationarity)

        if not feasible:
            logger.debug("empty slice", extra={"x": self.x.tolist(), "starts": len(initial)})
            return SliceResult(None, float("inf"), [], len(initial), best_stationarity)
        y_best, v_best = min(feasible, key=lambda item: item[1])
        return SliceResult(y_best, v_best, feasible, len(initial), best_stationarity)
