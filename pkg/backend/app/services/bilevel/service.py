"""
Optimistic/pessimistic value functions, optimistic solve, partial calmness and
pessimistic-existence reporting.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.concurrency import ordered_map
from app.core.config import AnalysisConfig
from app.core.exceptions import AllNodesInfeasible
from app.core.logging import get_logger, log_execution_time
from app.models.problem import BilevelProblem, Box
from app.models.system import ValueMode
from app.schemas.bilevel import (
    CalmnessReport,
    CalmnessVerdict,
    CalmnessWitness,
    ExistenceReport,
    GraphPointCheck,
    KappaOutcome,
    KappaVerdict,
    OptimisticSolution,
    OptPessValues,
    SufficientCondition,
    SufficientConditionsReport,
)
from app.schemas.cq import CQReport, Point, Restriction, Verdict
from app.schemas.geometry import IscVerdict
from app.schemas.parametric import GridAxis, GridSpec
from app.services.cq import build_solution_system, check_rcpld_S_via_multipliers
from app.services.geometry import inner_semicontinuity_probe, project
from app.services.parametric import LowerLevelSolver, grid_points, hypotheses_of
from app.services.sampling import NeighborhoodSampler, log_uniform_pattern

logger = get_logger(__name__)

DEFAULT_STEPS = 31
CALMNESS_SALT = 2
EXISTENCE_GRAPH_POINTS = 5
BINDING_U_NOTE = (
    "u is fixed at its binding value max(0, f(x,y) - phi(x)); sampling (x, y) suffices for violations"
)


def default_grid(box: Box, steps: int = DEFAULT_STEPS) -> GridSpec:
    return GridSpec(axes=[GridAxis(lo=lo, hi=hi, steps=steps) for lo, hi in zip(box.lower, box.upper)])


def phi_opt_pess(
    problem: BilevelProblem, x: Sequence[float], cfg: AnalysisConfig, solver: Optional[LowerLevelSolver] = None
) -> OptPessValues:
    """``inf``/``sup`` of ``F(x, .)`` over the computed ``S(x)``."""
    solver = solver or LowerLevelSolver(problem.lower, cfg)
    x = np.asarray(x, dtype=float).reshape(-1)
    solution = solver.solve(x)
    if solution.empty:
        return OptPessValues(x=x.tolist(), phi_o=float("inf"), phi_p=float("-inf"), empty=True)
    values = [problem.upper.value(x, np.asarray(y)) for y in solution.representatives]
    return OptPessValues(
        x=x.tolist(),
        phi_o=float(min(values)),
        phi_p=float(max(values)),
        empty=False,
        representatives=solution.representatives,
    )


def _best_response(
    problem: BilevelProblem, x: np.ndarray, solver: LowerLevelSolver, pessimistic: bool = False
) -> Tuple[float, Optional[List[float]]]:
    solution = solver.solve(x)
    if solution.empty:
        return float("inf"), None
    scored = [(problem.upper.value(x, np.asarray(y)), y) for y in solution.representatives]
    value, y = (max if pessimistic else min)(scored, key=lambda item: item[0])
    return float(value), y


@log_execution_time(logger)
def solve_optimistic(
    problem: BilevelProblem,
    cfg: AnalysisConfig,
    grid: Optional[GridSpec] = None,
    refine_rounds: Optional[int] = None,
    solver: Optional[LowerLevelSolver] = None,
) -> OptimisticSolution:
    """Grid search of ``phi_o`` over ``X`` followed by zooming rounds around the incumbent."""
    solver = solver or LowerLevelSolver(problem.lower, cfg)
    grid = grid or default_grid(problem.box)
    rounds = cfg.refine_rounds if refine_rounds is None else refine_rounds
    lower = np.asarray(problem.box.lower)
    upper = np.asarray(problem.box.upper)

    best: Optional[Tuple[float, np.ndarray, List[float]]] = None
    incumbents: List[float] = []
    evaluated = infeasible = 0
    half = np.array([(axis.hi - axis.lo) / 2.0 for axis in grid.axes])
    steps = [axis.steps for axis in grid.axes]

    for round_ in range(rounds + 1):
        points = [x for _, x in grid_points(grid)]
        results = ordered_map(lambda x: _best_response(problem, x, solver), points, cfg.workers)
        evaluated += len(points)
        for x, (value, y) in zip(points, results):
            if y is None:
                infeasible += 1
                continue
            if best is None or value < best[0]:
                best = (value, x, y)
        if best is None:
            raise AllNodesInfeasible("no grid node over X has a lower-level solution", nodes=len(points))
        incumbents.append(best[0])
        logger.debug("optimistic round", extra={"round": round_, "value": best[0]})

        spacing = np.array([2.0 * h / max(s - 1, 1) for h, s in zip(half, steps)])
        half = np.maximum(half / 10.0, spacing)
        lo = np.maximum(best[1] - half, lower)
        hi = np.minimum(best[1] + half, upper)
        grid = GridSpec(axes=[GridAxis(lo=float(a), hi=float(b), steps=s) for a, b, s in zip(lo, hi, steps)])

    value, x, y = best
    return OptimisticSolution(
        x=[float(v) for v in x],
        y=[float(v) for v in y],
        value=value,
        incumbents=incumbents,
        nodes_evaluated=evaluated,
        infeasible_nodes=infeasible,
    )


def _calmness_samples(
    problem: BilevelProblem,
    x_bar: np.ndarray,
    y_bar: np.ndarray,
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
) -> List[Tuple[float, np.ndarray, np.ndarray]]:
    """Feasible ``(x, y)`` near the reference: ``x`` clipped to ``X``, ``y`` projected onto ``Gamma(x)``."""
    n, m = problem.lower.n, problem.lower.m
    pattern = log_uniform_pattern(n + m, sampler.samples_per_radius, sampler.seed, CALMNESS_SALT)
    sys = problem.lower.sys

    def feasible_sample(item: Tuple[float, np.ndarray]) -> Optional[Tuple[float, np.ndarray, np.ndarray]]:
        radius, offset = item
        x = problem.box.clip(x_bar + radius * offset[:n])
        proj = project(sys, x, y_bar + radius * offset[n:], cfg)
        if proj.empty:
            return None
        y = np.asarray(proj.y_star)
        if np.linalg.norm(y - y_bar) > 2.0 * radius:
            return None
        return radius, x, y

    items = [(radius, offset) for radius in sampler.radii for offset in pattern]
    return [s for s in ordered_map(feasible_sample, items, cfg.workers) if s is not None]


@log_execution_time(logger)
def check_partial_calmness(
    problem: BilevelProblem,
    x_bar: Sequence[float],
    y_bar: Sequence[float],
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
    kappa_grid: Optional[Sequence[float]] = None,
    solver: Optional[LowerLevelSolver] = None,
) -> CalmnessReport:
    """Sampled exact-penalty test ``F(x,y) - F(x_bar,y_bar) + kappa * u >= 0``."""
    solver = solver or LowerLevelSolver(problem.lower, cfg)
    x_bar, y_bar = problem.lower.sys.check_point(x_bar, y_bar)
    kappas = sorted(kappa_grid or cfg.kappa_grid)
    reference = problem.upper.value(x_bar, y_bar)
    warnings: List[str] = []

    local_values = ordered_map(
        lambda x: _best_response(problem, problem.box.clip(x), solver)[0],
        [x for radius in sampler.radii for x in sampler.parameters(radius)],
        cfg.workers,
    )
    if any(v < reference - cfg.delta_viol for v in local_values):
        warnings.append("reference point is not a local optimistic minimizer on the sampled parameters")

    samples = _calmness_samples(problem, x_bar, y_bar, sampler, cfg)
    f = problem.lower.objective
    evaluated = []
    for radius, x, y in samples:
        u = max(0.0, f.value(x, y) - solver.phi(x))
        evaluated.append((radius, x, y, u, problem.upper.value(x, y) - reference))

    per_kappa: List[KappaVerdict] = []
    smallest = sampler.radii[-2:]
    for kappa in kappas:
        violating = {}
        for radius, x, y, u, delta in evaluated:
            margin = delta + kappa * u
            if margin < -cfg.delta_viol and (radius not in violating or margin < violating[radius][-1]):
                violating[radius] = (x, y, u, margin)
        if not violating:
            per_kappa.append(KappaVerdict(kappa=kappa, outcome=KappaOutcome.NO_VIOLATION))
            continue
        persistent = all(r in violating for r in smallest)
        witness_radius = min(violating)
        x, y, u, margin = violating[witness_radius]
        per_kappa.append(
            KappaVerdict(
                kappa=kappa,
                outcome=KappaOutcome.VIOLATION,
                persistent=persistent,
                violating_radii=sorted(violating, reverse=True),
                witness=CalmnessWitness(
                    x=[float(v) for v in x], y=[float(v) for v in y], u=u, margin=margin, radius=witness_radius
                ),
            )
        )

    # a violation counts only when it recurs at the smallest radii
    passing = [v.kappa for v in per_kappa if v.outcome == KappaOutcome.NO_VIOLATION or not v.persistent]
    if passing:
        overall, kappa_min = CalmnessVerdict.CALM, passing[0]
    else:
        overall, kappa_min = CalmnessVerdict.LIKELY_NOT, None
    if not samples:
        overall, kappa_min = CalmnessVerdict.INCONCLUSIVE, None
        warnings.append("no feasible samples near the reference point")

    logger.info("calmness check finished", extra={"verdict": overall.value, "kappa_min": kappa_min})
    return CalmnessReport(
        point=Point(x=x_bar.tolist(), y=y_bar.tolist()),
        reference_value=reference,
        kappa_grid=kappas,
        per_kappa=per_kappa,
        overall=overall,
        kappa_min=kappa_min,
        samples_used={str(r): sum(1 for s in samples if s[0] == r) for r in sampler.radii},
        warnings=warnings,
        notes=[BINDING_U_NOTE],
        tolerances=cfg.tolerance_block(),
    )


def calmness_sufficient_conditions(
    problem: BilevelProblem,
    x_bar: Sequence[float],
    y_bar: Sequence[float],
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
    solver: Optional[LowerLevelSolver] = None,
) -> SufficientConditionsReport:
    """Which RCPLD-based sufficient condition for partial calmness is met, if any.

    (a) convexity and local boundedness asserted, RCPLD_S on samples at every
    representative of ``S(x_bar)``; (b) ``S`` inner semicontinuous at the point
    with respect to the domain, RCPLD_S on samples at the point.
    """
    lower = problem.lower
    solver = solver or LowerLevelSolver(lower, cfg)
    x_bar, y_bar = lower.sys.check_point(x_bar, y_bar)
    representatives = solver.solutions(x_bar)

    at_point = check_rcpld_S_via_multipliers(lower, x_bar, y_bar, sampler, cfg, solver)
    reports: List[CQReport] = [at_point]
    for rep in representatives:
        if np.linalg.norm(rep - y_bar) > cfg.dedup_radius:
            reports.append(check_rcpld_S_via_multipliers(lower, x_bar, rep, sampler.recentered(x_bar, rep), cfg, solver))
    all_reps_hold = all(r.verdict == Verdict.HOLDS_ON_SAMPLES for r in reports)

    flags = lower.flags
    details_a = [
        f"convex_in_y asserted: {flags.convex_in_y}",
        f"locally_bounded asserted: {flags.locally_bounded}",
        f"RCPLD_S on samples at all {len(reports)} representatives: {all_reps_hold}",
    ]
    cond_a = SufficientCondition(
        name="convex_bounded_rcpld_s_at_solutions",
        met=flags.convex_in_y and flags.locally_bounded and all_reps_hold,
        details=details_a,
    )

    sys_s = build_solution_system(lower, x_bar, ValueMode.INEQ, solver)
    isc = inner_semicontinuity_probe(sys_s, x_bar, y_bar, sampler.restricted(Restriction.DOM), cfg)
    point_holds = at_point.verdict == Verdict.HOLDS_ON_SAMPLES
    cond_b = SufficientCondition(
        name="inner_semicontinuous_rcpld_s_at_point",
        met=isc.verdict == IscVerdict.LIKELY and point_holds,
        details=[f"inner semicontinuity: {isc.verdict.value}", f"RCPLD_S at point: {at_point.verdict.value}"],
    )
    return SufficientConditionsReport(
        point=Point(x=x_bar.tolist(), y=y_bar.tolist()),
        conditions=[cond_a, cond_b],
        rcpld_s=reports,
        isc_probe=isc,
        any_met=cond_a.met or cond_b.met,
        hypotheses=hypotheses_of(lower, inner_semicontinuity=isc.verdict.value),
    )


@log_execution_time(logger)
def pessimistic_existence_report(
    problem: BilevelProblem,
    cfg: AnalysisConfig,
    grid: Optional[GridSpec] = None,
    solver: Optional[LowerLevelSolver] = None,
) -> ExistenceReport:
    """Numerical check of the hypotheses for existence of a pessimistic solution, plus a grid incumbent."""
    lower = problem.lower
    solver = solver or LowerLevelSolver(lower, cfg)
    grid = grid or default_grid(problem.box)
    points = [x for _, x in grid_points(grid)]
    responses = ordered_map(lambda x: _best_response(problem, x, solver, pessimistic=True), points, cfg.workers)

    infeasible = [x.tolist() for x, (_, y) in zip(points, responses) if y is None]
    feasible = [(x, value, y) for x, (value, y) in zip(points, responses) if y is not None]
    single_valued = all(len(solver.solutions(x)) == 1 for x, _, _ in feasible)

    checks: List[GraphPointCheck] = []
    if feasible:
        picks = np.unique(np.linspace(0, len(feasible) - 1, min(EXISTENCE_GRAPH_POINTS, len(feasible))).astype(int))
        for i in picks:
            x = feasible[i][0]
            for rep in solver.solutions(x):
                sampler = NeighborhoodSampler.from_config(x, rep, cfg)
                report = check_rcpld_S_via_multipliers(lower, x, rep, sampler, cfg, solver)
                checks.append(
                    GraphPointCheck(point=Point(x=x.tolist(), y=rep.tolist()), verdict=report.verdict.value)
                )

    incumbent = min(feasible, key=lambda item: item[1]) if feasible else None
    x_in_dom = not infeasible
    all_pass = (
        x_in_dom
        and lower.flags.locally_bounded
        and all(c.verdict == Verdict.HOLDS_ON_SAMPLES.value for c in checks)
    )
    return ExistenceReport(
        x_compact=True,
        x_in_dom=x_in_dom,
        infeasible_nodes=infeasible,
        hypotheses=hypotheses_of(lower),
        rcpld_s_checks=checks,
        pessimistic_x=incumbent[0].tolist() if incumbent else None,
        pessimistic_y=[float(v) for v in incumbent[2]] if incumbent else None,
        pessimistic_value=incumbent[1] if incumbent else None,
        single_valued=single_valued,
        all_hypotheses_pass=all_pass,
    )
