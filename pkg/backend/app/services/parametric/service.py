"""
Lower-level solves, marginal-function scans and solution-map checks.
"""
import csv
import io
import itertools
import threading
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.concurrency import ordered_map
from app.core.config import AnalysisConfig
from app.core.exceptions import DimensionMismatchError, GridTooLarge, PreconditionViolation
from app.core.logging import get_logger, log_execution_time
from app.core.metrics import track_solver_call
from app.models.problem import ParametricProblem
from app.models.system import ValueFunctionConstraint, ValueMode
from app.schemas.geometry import IscVerdict
from app.schemas.parametric import (
    Discontinuity,
    GridNode,
    GridScan,
    GridSpec,
    Hypotheses,
    LipschitzReport,
    LowerSolution,
    LscVerdict,
    SMapReport,
)
from app.services.geometry import (
    ExpressionObjective,
    SliceSolver,
    estimate_rregularity,
    inner_semicontinuity_probe,
)
from app.services.sampling import NeighborhoodSampler

logger = get_logger(__name__)

MEMO_QUANTUM = 1e-9
BISECTION_HALVINGS = 12
MAX_BISECTED_PAIRS = 8
NON_SHRINKING = 0.75
MEMBERSHIP_TOL = 1e-5


class LowerLevelSolver:
    """Memoised ``phi``/``S`` oracle for one lower-level problem.

    Results are keyed by ``x`` quantised to a 1e-9 grid; the memo is shared
    between threads.
    """

    def __init__(self, problem: ParametricProblem, cfg: AnalysisConfig):
        self.problem = problem
        self.cfg = cfg
        self._memo: Dict[Tuple[int, ...], LowerSolution] = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(x: np.ndarray) -> Tuple[int, ...]:
        return tuple(int(v) for v in np.round(np.asarray(x, dtype=float) / MEMO_QUANTUM))

    def solve(self, x: Sequence[float]) -> LowerSolution:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.problem.n:
            raise DimensionMismatchError(f"parameter of dimension {x.shape[0]}, expected {self.problem.n}")
        key = self.key(x)
        with self._lock:
            cached = self._memo.get(key)
        if cached is not None:
            track_solver_call("memo_hit")
            return cached
        solution = self._solve(x)
        with self._lock:
            self._memo.setdefault(key, solution)
        return solution

    def _solve(self, x: np.ndarray) -> LowerSolution:
        track_solver_call("lower_level")
        problem, cfg = self.problem, self.cfg
        solver = SliceSolver(problem.sys, x, cfg)
        result = solver.minimize(
            ExpressionObjective(problem.objective, x),
            center=np.zeros(problem.m),
            starts=min(8 * problem.m, 64),
        )
        if result.empty:
            return LowerSolution(x=x.tolist(), phi=float("inf"), representatives=[], empty=True, restarts=result.restarts)

        phi = result.value
        ranked = sorted(
            (item for item in result.feasible if item[1] <= phi + cfg.solution_value_tol),
            key=lambda item: (item[1], tuple(item[0])),
        )
        representatives: List[np.ndarray] = []
        for y, _ in ranked:
            if all(np.linalg.norm(y - r) > cfg.dedup_radius for r in representatives):
                representatives.append(y)
        return LowerSolution(
            x=x.tolist(),
            phi=float(phi),
            representatives=[[float(v) for v in y] for y in representatives],
            empty=False,
            restarts=result.restarts,
        )

    def phi(self, x: Sequence[float]) -> float:
        return self.solve(x).phi

    def solutions(self, x: Sequence[float]) -> List[np.ndarray]:
        return [np.asarray(y) for y in self.solve(x).representatives]

    def contains(self, x: Sequence[float], y: Sequence[float], tol: float = MEMBERSHIP_TOL) -> bool:
        """Whether ``y`` is within ``tol`` of a computed representative of ``S(x)``."""
        y = np.asarray(y, dtype=float)
        return any(np.linalg.norm(y - r) <= tol for r in self.solutions(x))

    def value_constraint(self, x_ref: Sequence[float], mode: ValueMode) -> ValueFunctionConstraint:
        x_ref = np.asarray(x_ref, dtype=float).reshape(-1)
        return ValueFunctionConstraint(
            f=self.problem.f,
            mode=mode,
            x_ref=tuple(float(v) for v in x_ref),
            phi_ref=self.phi(x_ref),
            phi=self.phi,
            solutions=self.solutions,
        )


def hypotheses_of(problem: ParametricProblem, **probed: Optional[str]) -> Hypotheses:
    return Hypotheses(
        convex_in_y_asserted=problem.flags.convex_in_y,
        locally_bounded_asserted=problem.flags.locally_bounded,
        probed=dict(probed),
    )


def solve_lower(
    problem: ParametricProblem,
    x: Sequence[float],
    cfg: AnalysisConfig,
    solver: Optional[LowerLevelSolver] = None,
) -> LowerSolution:
    """``phi(x)`` and the representatives of ``S(x)``; an empty image gives ``phi = inf``."""
    return (solver or LowerLevelSolver(problem, cfg)).solve(x)


def grid_points(grid: GridSpec) -> List[Tuple[Tuple[int, ...], np.ndarray]]:
    axes = [np.linspace(axis.lo, axis.hi, axis.steps) for axis in grid.axes]
    out = []
    for index in itertools.product(*(range(axis.steps) for axis in grid.axes)):
        out.append((index, np.array([axes[d][i] for d, i in enumerate(index)])))
    return out


@log_execution_time(logger)
def scan(
    problem: ParametricProblem,
    grid: GridSpec,
    cfg: AnalysisConfig,
    solver: Optional[LowerLevelSolver] = None,
) -> GridScan:
    if len(grid.axes) != problem.n:
        raise DimensionMismatchError(f"grid has {len(grid.axes)} axes for {problem.n} parameters")
    if grid.size > cfg.max_grid_nodes:
        raise GridTooLarge(f"grid of {grid.size} nodes exceeds {cfg.max_grid_nodes}", nodes=grid.size)
    solver = solver or LowerLevelSolver(problem, cfg)
    points = grid_points(grid)
    solutions = ordered_map(lambda item: solver.solve(item[1]), points, cfg.workers)
    nodes = [
        GridNode(
            index=list(index),
            x=[float(v) for v in x],
            phi=sol.phi,
            representatives=sol.representatives,
            restarts=sol.restarts,
        )
        for (index, x), sol in zip(points, solutions)
    ]
    logger.info(
        "scan finished",
        extra={"nodes": len(nodes), "infeasible": sum(1 for n in nodes if not np.isfinite(n.phi))},
    )
    return GridScan(grid=grid, nodes=nodes, tolerances=cfg.tolerance_block())


def _neighbour_pairs(scan_: GridScan) -> List[Tuple[int, int]]:
    position = {tuple(node.index): i for i, node in enumerate(scan_.nodes)}
    pairs = []
    for i, node in enumerate(scan_.nodes):
        for axis in range(len(node.index)):
            nxt = list(node.index)
            nxt[axis] += 1
            j = position.get(tuple(nxt))
            if j is not None:
                pairs.append((i, j))
    return pairs


def _slope(a: GridNode, b: GridNode) -> float:
    gap = float(np.linalg.norm(np.asarray(a.x) - np.asarray(b.x)))
    return abs(a.phi - b.phi) / gap if gap > 0 else 0.0


def _in_window(x: Sequence[float], window: Optional[Sequence[Sequence[float]]]) -> bool:
    if window is None:
        return True
    return all(lo <= v <= hi for v, (lo, hi) in zip(x, window))


def _bisect(
    solver: LowerLevelSolver, left: np.ndarray, right: np.ndarray, phi_left: float, phi_right: float, cfg: AnalysisConfig
) -> Optional[Discontinuity]:
    """Localise a jump of ``phi`` between two parameters by repeated halving."""
    jumps = [abs(phi_left - phi_right)]
    for _ in range(BISECTION_HALVINGS):
        mid = 0.5 * (left + right)
        phi_mid = solver.phi(mid)
        if not np.isfinite(phi_mid):
            return None
        if abs(phi_left - phi_mid) >= abs(phi_mid - phi_right):
            right, phi_right = mid, phi_mid
        else:
            left, phi_left = mid, phi_mid
        jumps.append(abs(phi_left - phi_right))
    gap = float(np.linalg.norm(right - left))
    final_slope = jumps[-1] / gap if gap > 0 else float("inf")
    if final_slope > cfg.slope_cap and jumps[-1] >= NON_SHRINKING * jumps[-3]:
        return Discontinuity(
            left=left.tolist(),
            right=right.tolist(),
            location=(0.5 * (left + right)).tolist(),
            jump=jumps[-1],
            final_slope=final_slope,
        )
    return None


@log_execution_time(logger)
def lipschitz_scan(
    scan_: GridScan,
    cfg: AnalysisConfig,
    window: Optional[Sequence[Sequence[float]]] = None,
    solver: Optional[LowerLevelSolver] = None,
    hypotheses: Optional[Hypotheses] = None,
) -> LipschitzReport:
    """Neighbour slopes of ``phi`` on finite nodes, with bisection-confirmed jumps.

    Without a solver, pairs whose slope already exceeds the cap are reported
    unconfirmed.
    """
    nodes = scan_.nodes
    finite_pairs = [
        (i, j) for i, j in _neighbour_pairs(scan_) if np.isfinite(nodes[i].phi) and np.isfinite(nodes[j].phi)
    ]
    slopes = {pair: _slope(nodes[pair[0]], nodes[pair[1]]) for pair in finite_pairs}

    node_slopes: List[Optional[float]] = [None] * len(nodes)
    for (i, j), s in slopes.items():
        for k in (i, j):
            node_slopes[k] = s if node_slopes[k] is None else max(node_slopes[k], s)

    modulus = max(
        (s for (i, j), s in slopes.items() if _in_window(nodes[i].x, window) and _in_window(nodes[j].x, window)),
        default=0.0,
    )

    discontinuities: List[Discontinuity] = []
    largest = max(slopes.values(), default=0.0)
    candidates = sorted(
        (
            pair
            for pair, s in slopes.items()
            if abs(nodes[pair[0]].phi - nodes[pair[1]].phi) > 10.0 * cfg.solution_value_tol
            and (s >= 0.5 * largest or s > cfg.slope_cap)
        ),
        key=lambda pair: (-slopes[pair], pair),
    )[:MAX_BISECTED_PAIRS]
    for i, j in candidates:
        a, b = nodes[i], nodes[j]
        if solver is None:
            if slopes[(i, j)] > cfg.slope_cap:
                discontinuities.append(
                    Discontinuity(
                        left=a.x,
                        right=b.x,
                        location=[0.5 * (u + v) for u, v in zip(a.x, b.x)],
                        jump=abs(a.phi - b.phi),
                        final_slope=slopes[(i, j)],
                    )
                )
            continue
        found = _bisect(solver, np.asarray(a.x), np.asarray(b.x), a.phi, b.phi, cfg)
        if found is not None:
            discontinuities.append(found)

    return LipschitzReport(
        node_slopes=node_slopes,
        discontinuities=discontinuities,
        modulus=modulus,
        window=[list(w) for w in window] if window is not None else None,
        lipschitz_on_dom=not discontinuities,
        hypotheses=hypotheses,
    )


def export_scan_csv(scan_: GridScan) -> str:
    """One row per node: parameters, phi, number of representatives, first representative."""
    n = len(scan_.grid.axes)
    m = max((len(node.representatives[0]) for node in scan_.nodes if node.representatives), default=0)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([f"x{i + 1}" for i in range(n)] + ["phi", "n_solutions"] + [f"y{j + 1}" for j in range(m)])
    for node in scan_.nodes:
        first = node.representatives[0] if node.representatives else [""] * m
        writer.writerow(
            [repr(v) for v in node.x]
            + ["inf" if not np.isfinite(node.phi) else repr(node.phi), len(node.representatives)]
            + [v if v == "" else repr(v) for v in first]
        )
    return buffer.getvalue()


@log_execution_time(logger)
def s_map_probes(
    problem: ParametricProblem,
    x_bar: Sequence[float],
    y_bar: Sequence[float],
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
    solver: Optional[LowerLevelSolver] = None,
) -> SMapReport:
    """R-regularity and lower semicontinuity estimates for the solution map ``S``."""
    solver = solver or LowerLevelSolver(problem, cfg)
    x_bar = np.asarray(x_bar, dtype=float).reshape(-1)
    y_bar = np.asarray(y_bar, dtype=float).reshape(-1)
    solution = solver.solve(x_bar)
    if solution.empty or not solver.contains(x_bar, y_bar):
        raise PreconditionViolation(
            "reference point is not a computed lower-level solution",
            representatives=solution.representatives,
        )
    sys_s = problem.sys.with_value_constraint(solver.value_constraint(x_bar, ValueMode.INEQ))
    rreg = estimate_rregularity(sys_s, x_bar, y_bar, sampler, cfg)
    isc = [
        inner_semicontinuity_probe(sys_s, x_bar, rep, sampler.recentered(x_bar, rep), cfg)
        for rep in solution.representatives
    ]
    verdicts = {item.verdict for item in isc}
    if verdicts == {IscVerdict.LIKELY}:
        lsc = LscVerdict.LIKELY
    elif IscVerdict.LIKELY_NOT in verdicts:
        lsc = LscVerdict.LIKELY_NOT
    else:
        lsc = LscVerdict.INCONCLUSIVE
    return SMapReport(
        rreg_probe=rreg,
        isc_probes=isc,
        lsc_verdict=lsc,
        solutions=solution.representatives,
        phi=solution.phi,
        hypotheses=hypotheses_of(problem, r_regularity=rreg.verdict.value, lower_semicontinuity=lsc.value),
    )
