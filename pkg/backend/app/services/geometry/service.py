"""
Residuals, projections onto ``Gamma(x)``, multiplier tests and the sampled
R-regularity / inner-semicontinuity estimates.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.concurrency import ordered_map
from app.core.config import AnalysisConfig
from app.core.exceptions import DegenerateDirection
from app.core.logging import get_logger, log_execution_time
from app.core.metrics import track_solver_call
from app.models.system import ParametricSystem
from app.schemas.cq import Point, Restriction
from app.schemas.geometry import (
    IscProbe,
    IscRecord,
    IscVerdict,
    MultiplierBoundRecord,
    MultiplierBoundScan,
    MultiplierProbe,
    Projection,
    RadiusRecord,
    RegularityProbe,
    RegularityVerdict,
    Residual,
    SolverTrace,
    UniformScan,
)
from app.services.geometry.solver import DistanceObjective, SliceSolver
from app.services.kernel import solve_lp
from app.services.sampling import NeighborhoodSampler, Sample

logger = get_logger(__name__)

STATIONARITY_RESIDUAL = 1e-7
DOMAIN_NOTE = "domain membership decided by empty-image detection of the projection solver"


def _point(x: np.ndarray, y: np.ndarray) -> Point:
    return Point(x=[float(v) for v in x], y=[float(v) for v in y])


def residual(sys: ParametricSystem, x: Sequence[float], y: Sequence[float], phi: Optional[float] = None) -> Residual:
    """``max{0, max_I h_i, max_J |h_i|}`` and the label attaining it."""
    x, y = sys.check_point(x, y)
    if sys.value_constraint is not None and phi is None:
        phi = sys.value_constraint.phi(x)
    worst, argmax = 0.0, None
    for label in sys.ineq_labels:
        value = sys.value(label, x, y, phi)
        if value > worst:
            worst, argmax = value, label
    for label in sys.eq_labels:
        value = abs(sys.value(label, x, y, phi))
        if value > worst:
            worst, argmax = value, label
    return Residual(value=float(worst), argmax_constraint=argmax)


def project(
    sys: ParametricSystem,
    x: Sequence[float],
    nu: Sequence[float],
    cfg: AnalysisConfig,
    phi: Optional[float] = None,
) -> Projection:
    """Nearest point of ``Gamma(x)`` to ``nu``; an empty image gives distance ``inf``."""
    x, nu = sys.check_point(x, nu)
    track_solver_call("projection")
    solver = SliceSolver(sys, x, cfg, phi)
    if solver.constraints.feasible(nu):
        return Projection(
            y_star=[float(v) for v in nu],
            distance=0.0,
            trace=SolverTrace(restarts=0, stationarity=0.0),
        )
    seeds: List[np.ndarray] = []
    vc = sys.value_constraint
    if vc is not None and vc.solutions is not None:
        seeds = [np.asarray(s, dtype=float) for s in vc.solutions(x)]
    result = solver.minimize(DistanceObjective(nu), center=nu, seeds=seeds, starts=cfg.restarts)
    trace = SolverTrace(
        restarts=result.restarts,
        stationarity=float(result.stationarity),
        candidates=len(result.feasible),
    )
    if result.empty:
        return Projection(y_star=None, distance=float("inf"), empty=True, trace=trace)
    return Projection(
        y_star=[float(v) for v in result.y],
        distance=float(np.sqrt(max(result.value, 0.0))),
        trace=trace,
    )


def _multiplier_lp(
    sys: ParametricSystem,
    x: np.ndarray,
    y: np.ndarray,
    direction: np.ndarray,
    cfg: AnalysisConfig,
    bound: Optional[float],
) -> Tuple[Optional[dict], Optional[float]]:
    """Minimal l1 multiplier with ``direction + sum lam_i grad h_i = 0``.

    Inequality multipliers live on the active set only; equality multipliers
    are split into nonnegative parts.
    """
    phi = sys.value_constraint.phi(x) if sys.value_constraint is not None else None
    active = [l for l in sys.ineq_labels if sys.value(l, x, y, phi) >= -cfg.tol_act]
    eq = sys.eq_labels
    G_act = sys.gradients(active, x, y)
    G_eq = sys.gradients(eq, x, y)
    columns = np.hstack([G_act.T, G_eq.T, -G_eq.T]) if (active or eq) else np.zeros((sys.m, 0))
    k = columns.shape[1]
    A = columns
    b = -direction
    cost = np.ones(k)
    if bound is not None:
        A = np.vstack([np.hstack([A, np.zeros((sys.m, 1))]), np.concatenate([np.ones(k), [1.0]])[None, :]])
        b = np.concatenate([b, [bound]])
        cost = np.concatenate([cost, [0.0]])
    result = solve_lp(cost, A, b, tol=cfg.tol_lp)
    if not result.feasible or result.x is None:
        return None, None
    lam_act = result.x[: len(active)]
    mu = result.x[len(active): len(active) + len(eq)] - result.x[len(active) + len(eq): k]
    multipliers = {str(l): 0.0 for l in sys.labels}
    for label, value in zip(active, lam_act):
        multipliers[str(label)] = float(value)
    for label, value in zip(eq, mu):
        multipliers[str(label)] = float(value)
    stationarity = direction + lam_act @ G_act + mu @ G_eq
    return multipliers, float(np.linalg.norm(stationarity))


def multiplier_probe(
    sys: ParametricSystem,
    x: Sequence[float],
    y: Sequence[float],
    nu: Sequence[float],
    bound: float,
    cfg: AnalysisConfig,
) -> MultiplierProbe:
    """Is ``Lambda_nu^M(x, y)`` nonempty?"""
    x, y = sys.check_point(x, y)
    nu = np.asarray(nu, dtype=float).reshape(-1)
    gap = float(np.linalg.norm(y - nu))
    if gap == 0.0:
        raise DegenerateDirection("y coincides with nu; the normal direction is undefined")
    multipliers, stationarity = _multiplier_lp(sys, x, y, (y - nu) / gap, cfg, bound)
    if multipliers is None or stationarity > STATIONARITY_RESIDUAL:
        return MultiplierProbe(exists=False, bound=bound, stationarity_residual=stationarity)
    return MultiplierProbe(
        exists=True,
        multipliers=multipliers,
        bound=bound,
        l1_norm=float(sum(abs(v) for v in multipliers.values())),
        stationarity_residual=stationarity,
    )


@dataclass
class _SampleOutcome:
    sample: Sample
    hit: bool
    empty: bool = False
    ratio: Optional[float] = None
    y_star: Optional[np.ndarray] = None


def _evaluate_sample(sys: ParametricSystem, sample: Sample, sampler: NeighborhoodSampler, cfg: AnalysisConfig) -> _SampleOutcome:
    accepted = sampler.accepts(sample.x)
    if accepted is False:
        return _SampleOutcome(sample, hit=False)
    phi = sys.value_constraint.phi(sample.x) if sys.value_constraint is not None else None
    res = residual(sys, sample.x, sample.y, phi).value
    if res <= cfg.tol_feas:
        return _SampleOutcome(sample, hit=True)
    proj = project(sys, sample.x, sample.y, cfg, phi)
    if proj.empty:
        if sampler.restriction == Restriction.DOM:
            return _SampleOutcome(sample, hit=False, empty=True)
        return _SampleOutcome(sample, hit=True, empty=True, ratio=float("inf"))
    return _SampleOutcome(sample, hit=True, ratio=proj.distance / res, y_star=np.asarray(proj.y_star))


def _divergence_verdict(values: List[float], counts: List[int], cfg: AnalysisConfig) -> RegularityVerdict:
    """Shared verdict rule over per-radius maxima ordered from the largest radius."""
    if np.isinf(values[-1]):
        return RegularityVerdict.LIKELY_NOT
    if not any(counts):
        return RegularityVerdict.CONSISTENT
    k_max, k_min = values[0], values[-1]
    if k_min > cfg.divergence_factor * k_max and k_min > cfg.divergence_abs:
        return RegularityVerdict.LIKELY_NOT
    observed = [v for v, c in zip(values, counts) if c > 0]
    if any(np.isinf(v) for v in observed):
        return RegularityVerdict.INCONCLUSIVE
    low, high = min(observed), max(observed)
    if high == 0.0 or (low > 0.0 and high / low < cfg.consistent_spread):
        return RegularityVerdict.CONSISTENT
    return RegularityVerdict.INCONCLUSIVE


@log_execution_time(logger)
def estimate_rregularity(
    sys: ParametricSystem,
    x_bar: Sequence[float],
    y_bar: Sequence[float],
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
) -> RegularityProbe:
    """Sampled estimate of the error-bound modulus around ``(x_bar, y_bar)``."""
    x_bar, y_bar = sys.check_point(x_bar, y_bar)
    notes: List[str] = []
    center_res = residual(sys, x_bar, y_bar).value
    if center_res > cfg.tol_feas:
        notes.append(f"center is infeasible (residual {center_res:.3g})")
    if sampler.restriction == Restriction.DOM:
        notes.append(DOMAIN_NOTE)

    outcomes = ordered_map(lambda s: _evaluate_sample(sys, s, sampler, cfg), list(sampler.joint()), cfg.workers)

    records: List[RadiusRecord] = []
    hits = 0
    for radius in sampler.radii:
        group = [o for o in outcomes if o.sample.radius == radius]
        ratios = [o for o in group if o.ratio is not None]
        best = max(ratios, key=lambda o: o.ratio, default=None)
        hits += sum(o.hit for o in group)
        records.append(
            RadiusRecord(
                radius=radius,
                samples=len(group),
                omega_hits=sum(o.hit for o in group),
                ratios=len(ratios),
                empty_images=sum(o.empty for o in group),
                max_ratio=best.ratio if best is not None else 0.0,
                argmax=_point(best.sample.x, best.sample.y) if best is not None else None,
            )
        )

    verdict = _divergence_verdict(
        [r.max_ratio for r in records], [r.ratios for r in records], cfg
    )
    if not any(r.ratios for r in records):
        notes.append("no sampled point violated the constraints")
    logger.info(
        "R-regularity estimate finished",
        extra={"verdict": verdict.value, "kappa": [r.max_ratio for r in records]},
    )
    return RegularityProbe(
        center=_point(x_bar, y_bar),
        records=records,
        verdict=verdict,
        restriction=sampler.restriction,
        omega_hit_rate=hits / max(sampler.total, 1),
        notes=notes,
        tolerances=cfg.tolerance_block(),
    )


@log_execution_time(logger)
def inner_semicontinuity_probe(
    sys: ParametricSystem,
    x_bar: Sequence[float],
    y_bar: Sequence[float],
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
) -> IscProbe:
    """``d(r) = max dist(y_bar, Gamma(x))`` over sampled ``x`` in ``Omega`` within ``r`` of ``x_bar``."""
    x_bar, y_bar = sys.check_point(x_bar, y_bar)

    def distance(x: np.ndarray) -> Optional[float]:
        if sampler.accepts(x) is False:
            return None
        proj = project(sys, x, y_bar, cfg)
        if proj.empty and sampler.restriction == Restriction.DOM:
            return None
        return proj.distance

    records: List[IscRecord] = []
    for radius in sampler.radii:
        xs = sampler.parameters(radius)
        distances = ordered_map(distance, xs, cfg.workers)
        hits = [(d, x) for d, x in zip(distances, xs) if d is not None]
        worst = max(hits, key=lambda item: item[0], default=None)
        records.append(
            IscRecord(
                radius=radius,
                samples=len(xs),
                omega_hits=len(hits),
                max_distance=worst[0] if worst is not None else 0.0,
                argmax_x=[float(v) for v in worst[1]] if worst is not None else None,
            )
        )

    observed = [r for r in records if r.omega_hits > 0]
    if not observed:
        verdict = IscVerdict.INCONCLUSIVE
    else:
        d_max, d_min = observed[0].max_distance, observed[-1].max_distance
        r_min = observed[-1].radius
        if np.isfinite(d_min) and (d_min < cfg.isc_gap * d_max or d_min < 10.0 * r_min):
            verdict = IscVerdict.LIKELY
        elif min(r.max_distance for r in observed) > cfg.isc_gap:
            verdict = IscVerdict.LIKELY_NOT
        else:
            verdict = IscVerdict.INCONCLUSIVE
    return IscProbe(
        center=_point(x_bar, y_bar),
        records=records,
        verdict=verdict,
        restriction=sampler.restriction,
        tolerances=cfg.tolerance_block(),
    )


def uniform_rregularity_scan(
    sys: ParametricSystem,
    graph_points: Sequence[Tuple[Sequence[float], Sequence[float]]],
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
) -> UniformScan:
    estimates = [
        estimate_rregularity(sys, x, y, sampler.recentered(x, y), cfg) for x, y in graph_points
    ]
    kappa = max((p.records[0].max_ratio for p in estimates), default=0.0)
    diverging = [p.center for p in estimates if p.verdict == RegularityVerdict.LIKELY_NOT]
    return UniformScan(kappa_uniform=kappa, probes=estimates, diverging_points=diverging)


def multiplier_bound_scan(
    sys: ParametricSystem,
    x_bar: Sequence[float],
    y_bar: Sequence[float],
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
) -> MultiplierBoundScan:
    """Minimal multiplier norms of projections from infeasible samples, per radius."""
    x_bar, y_bar = sys.check_point(x_bar, y_bar)
    outcomes = ordered_map(lambda s: _evaluate_sample(sys, s, sampler, cfg), list(sampler.joint()), cfg.workers)

    records: List[MultiplierBoundRecord] = []
    for radius in sampler.radii:
        group = [o for o in outcomes if o.sample.radius == radius and o.y_star is not None]
        norms = []
        for o in group:
            gap = o.y_star - o.sample.y
            length = float(np.linalg.norm(gap))
            if length == 0.0:
                continue
            multipliers, stationarity = _multiplier_lp(sys, o.sample.x, o.y_star, gap / length, cfg, None)
            if multipliers is None or stationarity > STATIONARITY_RESIDUAL:
                norms.append(float("inf"))
            else:
                norms.append(float(sum(abs(v) for v in multipliers.values())))
        records.append(
            MultiplierBoundRecord(
                radius=radius,
                samples=sampler.samples_per_radius,
                probed=len(norms),
                max_multiplier_norm=max(norms, default=0.0),
            )
        )
    verdict = _divergence_verdict(
        [r.max_multiplier_norm for r in records], [r.probed for r in records], cfg
    )
    return MultiplierBoundScan(
        center=_point(x_bar, y_bar),
        records=records,
        verdict=verdict,
        tolerances=cfg.tolerance_block(),
    )

