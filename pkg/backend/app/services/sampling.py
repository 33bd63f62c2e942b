"""
Deterministic neighborhood sampling.

Every radius reuses the same unit-ball pattern, scaled, so shrinking the radius
samples the same directions at a finer scale. Patterns are prefix-stable: asking
for more samples with the same seed extends the list without changing the
points already drawn.
"""
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence

import numpy as np

from app.core.config import AnalysisConfig
from app.schemas.cq import Restriction

Membership = Callable[[np.ndarray], bool]


def unit_ball_pattern(dim: int, count: int, seed: int, salt: int = 0) -> np.ndarray:
    """``count`` points uniform in the closed unit ball of ``R^dim``, shape ``(count, dim)``."""
    rng = np.random.default_rng([seed, salt])
    out = np.zeros((count, dim))
    if dim == 0:
        return out
    for k in range(count):
        g = rng.standard_normal(dim)
        u = rng.random()
        norm = np.linalg.norm(g)
        if norm == 0.0:
            continue
        out[k] = g / norm * u ** (1.0 / dim)
    return out


def log_uniform_pattern(dim: int, count: int, seed: int, salt: int = 0, decades: float = 2.0) -> np.ndarray:
    """Random directions with lengths log-uniform in ``[10^-decades, 1]``."""
    rng = np.random.default_rng([seed, salt])
    out = np.zeros((count, dim))
    if dim == 0:
        return out
    for k in range(count):
        g = rng.standard_normal(dim)
        u = rng.random()
        norm = np.linalg.norm(g)
        if norm == 0.0:
            continue
        out[k] = g / norm * 10.0 ** (-decades * u)
    return out


@dataclass(frozen=True)
class Sample:
    radius: float
    index: int
    x: np.ndarray
    y: np.ndarray


class NeighborhoodSampler:
    """Samples ``(x, y)`` in shrinking balls around a center point.

    ``restriction`` selects the parameter set Omega the samples must lie in:
    the whole space, the domain of the mapping under study (membership is
    decided by the caller through empty-image detection), or a custom oracle.
    """

    JOINT_SALT = 0
    PARAM_SALT = 1

    def __init__(
        self,
        center_x: Sequence[float],
        center_y: Sequence[float],
        radii: Sequence[float] = (1e-1, 1e-2, 1e-3),
        samples_per_radius: int = 200,
        seed: int = 42,
        restriction: Restriction = Restriction.FULL,
        membership: Optional[Membership] = None,
    ):
        radii = tuple(float(r) for r in radii)
        if not radii or any(r <= 0 for r in radii):
            raise ValueError("radii must be strictly positive")
        if any(a <= b for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be strictly descending")
        if restriction == Restriction.CUSTOM and membership is None:
            raise ValueError("a custom restriction needs a membership oracle")
        self.center_x = np.asarray(center_x, dtype=float).reshape(-1)
        self.center_y = np.asarray(center_y, dtype=float).reshape(-1)
        self.radii = radii
        self.samples_per_radius = int(samples_per_radius)
        self.seed = int(seed)
        self.restriction = restriction
        self.membership = membership

    @classmethod
    def from_config(
        cls,
        x: Sequence[float],
        y: Sequence[float],
        cfg: AnalysisConfig,
        restriction: Restriction = Restriction.FULL,
        membership: Optional[Membership] = None,
    ) -> "NeighborhoodSampler":
        return cls(x, y, cfg.radii, cfg.samples_per_radius, cfg.seed, restriction, membership)

    def recentered(self, x: Sequence[float], y: Sequence[float]) -> "NeighborhoodSampler":
        return NeighborhoodSampler(
            x, y, self.radii, self.samples_per_radius, self.seed, self.restriction, self.membership
        )

    def restricted(self, restriction: Restriction, membership: Optional[Membership] = None) -> "NeighborhoodSampler":
        return NeighborhoodSampler(
            self.center_x,
            self.center_y,
            self.radii,
            self.samples_per_radius,
            self.seed,
            restriction,
            membership,
        )

    @property
    def n(self) -> int:
        return self.center_x.shape[0]

    @property
    def m(self) -> int:
        return self.center_y.shape[0]

    @property
    def total(self) -> int:
        return len(self.radii) * self.samples_per_radius

    def joint(self) -> Iterator[Sample]:
        """Samples with ``||(x, y) - center|| <= r`` for every radius, in (radius, index) order."""
        pattern = unit_ball_pattern(self.n + self.m, self.samples_per_radius, self.seed, self.JOINT_SALT)
        for radius in self.radii:
            for k, offset in enumerate(pattern):
                yield Sample(
                    radius,
                    k,
                    self.center_x + radius * offset[: self.n],
                    self.center_y + radius * offset[self.n :],
                )

    def parameters(self, radius: float) -> List[np.ndarray]:
        """Parameter samples in ``B_r(center_x)``."""
        pattern = unit_ball_pattern(self.n, self.samples_per_radius, self.seed, self.PARAM_SALT)
        return [self.center_x + radius * offset for offset in pattern]

    def accepts(self, x: np.ndarray) -> Optional[bool]:
        """Custom-oracle membership; ``None`` when the caller has to decide (full or domain)."""
        if self.restriction == Restriction.FULL:
            return True
        if self.restriction == Restriction.CUSTOM:
            return bool(self.membership(x))
        return None
