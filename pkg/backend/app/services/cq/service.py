"""
Constraint qualifications of ``Gamma`` and of the solution-map system.

LICQ and MFCQ are pointwise. RCRCQ and RCPLD quantify over a neighborhood,
which is replaced by the sampled balls of a ``NeighborhoodSampler``; their
positive verdict is therefore ``holds_on_samples``.
"""
import itertools
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.concurrency import ordered_map
from app.core.config import AnalysisConfig
from app.core.exceptions import LowerLevelUnsolved, SubsetCapExceeded
from app.core.logging import get_logger, log_execution_time
from app.models.problem import ParametricProblem
from app.models.system import VALUE_LABEL, ParametricSystem, ValueMode
from app.schemas.cq import (
    ActiveSet,
    CQCertificate,
    CQName,
    CQReport,
    MultiplierSupport,
    Point,
    RankWitness,
    Restriction,
    SampleCoverage,
    Verdict,
)
from app.services.geometry import project, residual
from app.services.kernel import VecFamily, basis_subset, find_feasible, matrix_rank, positive_linear_dependent
from app.services.parametric import LowerLevelSolver
from app.services.sampling import NeighborhoodSampler, Sample

logger = get_logger(__name__)

EPS_POS_CAVEAT = (
    "supports are realizable with every positive multiplier at least eps_pos; "
    "supports needing components in (0, eps_pos) are not detected"
)


def _point(x: np.ndarray, y: np.ndarray) -> Point:
    return Point(x=[float(v) for v in x], y=[float(v) for v in y])


def active_set(sys: ParametricSystem, x: Sequence[float], y: Sequence[float], cfg: AnalysisConfig) -> ActiveSet:
    """Inequality labels with ``|h_i(x, y)| <= tol_act``."""
    x, y = sys.check_point(x, y)
    phi = sys.value_constraint.phi(x) if sys.value_constraint is not None else None
    indices = [label for label in sys.ineq_labels if abs(sys.value(label, x, y, phi)) <= cfg.tol_act]
    res = residual(sys, x, y, phi).value
    return ActiveSet(
        indices=indices,
        tol_act=cfg.tol_act,
        point=_point(x, y),
        residual=res,
        feasible=res <= cfg.tol_feas,
    )


def _family(sys: ParametricSystem, labels: Sequence[int], x: np.ndarray, y: np.ndarray) -> VecFamily:
    return VecFamily.of(list(zip(labels, sys.gradients(labels, x, y))), dim=sys.m)


def _report(
    name: CQName,
    act: ActiveSet,
    verdict: Verdict,
    cfg: AnalysisConfig,
    certificate: Optional[CQCertificate] = None,
    coverage: Optional[List[SampleCoverage]] = None,
    restriction: Restriction = Restriction.FULL,
    notes: Iterable[str] = (),
    warnings: Iterable[str] = (),
) -> CQReport:
    warnings = list(warnings)
    if not act.feasible:
        warnings.insert(0, f"reference point is infeasible (residual {act.residual:.3g})")
    return CQReport(
        cq_name=name,
        point=act.point,
        verdict=verdict,
        active_set=act.indices,
        certificate=certificate,
        coverage=coverage or [],
        restriction=restriction,
        warnings=warnings,
        notes=list(notes),
        tolerances=cfg.tolerance_block(),
    )


def check_licq(sys: ParametricSystem, x_bar, y_bar, cfg: AnalysisConfig) -> CQReport:
    act = active_set(sys, x_bar, y_bar, cfg)
    x, y = sys.check_point(x_bar, y_bar)
    labels = sorted(act.indices + sys.eq_labels)
    rank = matrix_rank(sys.gradients(labels, x, y), cfg.tol_rank) if labels else 0
    verdict = Verdict.HOLDS if rank == len(labels) else Verdict.FAILS
    return _report(CQName.LICQ, act, verdict, cfg, CQCertificate(family=labels, rank=rank))


def check_mfcq(sys: ParametricSystem, x_bar, y_bar, cfg: AnalysisConfig) -> CQReport:
    act = active_set(sys, x_bar, y_bar, cfg)
    x, y = sys.check_point(x_bar, y_bar)
    if not act.indices and not sys.eq_labels:
        return _report(CQName.MFCQ, act, Verdict.HOLDS, cfg, notes=["no active constraints"])
    dependent, cert = positive_linear_dependent(
        _family(sys, act.indices, x, y), _family(sys, sys.eq_labels, x, y), cfg.tol_lp, cfg.tol_rank
    )
    family = sorted(act.indices + sys.eq_labels)
    if dependent:
        return _report(CQName.MFCQ, act, Verdict.FAILS, cfg, CQCertificate(family=family, pld=cert))
    return _report(CQName.MFCQ, act, Verdict.HOLDS, cfg, CQCertificate(family=family))


def _subsets(labels: Sequence[int], cfg: AnalysisConfig) -> List[Tuple[int, ...]]:
    if len(labels) > cfg.subset_cap:
        raise SubsetCapExceeded(
            f"{len(labels)} active constraints exceed the subset cap {cfg.subset_cap}",
            active=list(labels),
            cap=cfg.subset_cap,
        )
    return [combo for size in range(len(labels) + 1) for combo in itertools.combinations(labels, size)]


def _in_domain(sys: ParametricSystem, sample: Sample, cfg: AnalysisConfig) -> bool:
    return not project(sys, sample.x, sample.y, cfg).empty


def _admitted_samples(
    sys: ParametricSystem,
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
    in_domain: Optional[Callable[[Sample], bool]] = None,
) -> List[Tuple[Sample, bool]]:
    """Every sample with a flag telling whether its parameter lies in Omega.

    Under ``Restriction.DOM`` membership defaults to ``dom Gamma``; pass ``in_domain`` for another mapping.
    """
    in_domain = in_domain or (lambda sample: _in_domain(sys, sample, cfg))

    def admit(sample: Sample) -> Tuple[Sample, bool]:
        accepted = sampler.accepts(sample.x)
        if accepted is None:
            accepted = in_domain(sample)
        return sample, accepted

    return ordered_map(admit, list(sampler.joint()), cfg.workers)


def _coverage(sampler: NeighborhoodSampler, admitted: List[Tuple[Sample, bool]]) -> List[SampleCoverage]:
    return [
        SampleCoverage(
            radius=radius,
            samples=sampler.samples_per_radius,
            checked=sum(1 for s, ok in admitted if ok and s.radius == radius),
        )
        for radius in sampler.radii
    ]


def _sample_gradients(
    sys: ParametricSystem, labels: Sequence[int], admitted: List[Tuple[Sample, bool]], cfg: AnalysisConfig
) -> List[Tuple[Sample, Dict[int, np.ndarray]]]:
    def grads(sample: Sample) -> Tuple[Sample, Dict[int, np.ndarray]]:
        rows = sys.gradients(labels, sample.x, sample.y)
        return sample, dict(zip(labels, rows))

    return ordered_map(grads, [s for s, ok in admitted if ok], cfg.workers)


def _rank(rows: Dict[int, np.ndarray], labels: Sequence[int], m: int, tol_rank: float) -> int:
    if not labels:
        return 0
    return matrix_rank(np.vstack([rows[l] for l in labels]).reshape(len(labels), m), tol_rank)


@log_execution_time(logger)
def check_rcrcq(sys: ParametricSystem, x_bar, y_bar, sampler: NeighborhoodSampler, cfg: AnalysisConfig) -> CQReport:
    act = active_set(sys, x_bar, y_bar, cfg)
    x, y = sys.check_point(x_bar, y_bar)
    subsets = _subsets(act.indices, cfg)
    labels = sorted(act.indices + sys.eq_labels)
    center = dict(zip(labels, sys.gradients(labels, x, y)))
    admitted = _admitted_samples(sys, sampler, cfg)
    coverage = _coverage(sampler, admitted)
    center_rank = {K: _rank(center, list(K) + sys.eq_labels, sys.m, cfg.tol_rank) for K in subsets}

    for sample, rows in _sample_gradients(sys, labels, admitted, cfg):
        for K in subsets:
            family = list(K) + sys.eq_labels
            r = _rank(rows, family, sys.m, cfg.tol_rank)
            if r != center_rank[K]:
                witness = RankWitness(
                    subset=sorted(family),
                    radius=sample.radius,
                    sample_index=sample.index,
                    point=_point(sample.x, sample.y),
                    rank_center=center_rank[K],
                    rank_sample=r,
                )
                return _report(
                    CQName.RCRCQ, act, Verdict.FAILS, cfg,
                    CQCertificate(family=sorted(family), witness=witness),
                    coverage, sampler.restriction,
                )
    return _report(CQName.RCRCQ, act, Verdict.HOLDS_ON_SAMPLES, cfg, None, coverage, sampler.restriction)


@log_execution_time(logger)
def check_rcpld(sys: ParametricSystem, x_bar, y_bar, sampler: NeighborhoodSampler, cfg: AnalysisConfig) -> CQReport:
    """Basis ``S`` of the equality gradients, constant equality rank, stable dependence of PLD subsets."""
    act = active_set(sys, x_bar, y_bar, cfg)
    x, y = sys.check_point(x_bar, y_bar)
    subsets = _subsets(act.indices, cfg)
    eq_family = _family(sys, sys.eq_labels, x, y)
    basis = [int(l) for l in basis_subset(eq_family, cfg.tol_rank)]
    eq_rank = len(basis)

    dependent: List[Tuple[int, ...]] = []
    for K in subsets:
        if not K and not basis:
            continue
        is_dep, _ = positive_linear_dependent(
            _family(sys, list(K), x, y), _family(sys, basis, x, y), cfg.tol_lp, cfg.tol_rank
        )
        if is_dep:
            dependent.append(K)

    labels = sorted(set(act.indices) | set(sys.eq_labels))
    admitted = _admitted_samples(sys, sampler, cfg)
    coverage = _coverage(sampler, admitted)
    certificate = CQCertificate(
        family=labels,
        basis=basis,
        dependent_subsets=[sorted(K) for K in dependent],
    )

    for sample, rows in _sample_gradients(sys, labels, admitted, cfg):
        r = _rank(rows, sys.eq_labels, sys.m, cfg.tol_rank)
        if r != eq_rank:
            certificate.witness = RankWitness(
                subset=list(sys.eq_labels),
                radius=sample.radius,
                sample_index=sample.index,
                point=_point(sample.x, sample.y),
                rank_center=eq_rank,
                rank_sample=r,
            )
            return _report(CQName.RCPLD, act, Verdict.FAILS, cfg, certificate, coverage, sampler.restriction)
        for K in dependent:
            family = list(K) + basis
            r = _rank(rows, family, sys.m, cfg.tol_rank)
            if r == len(family):
                certificate.witness = RankWitness(
                    subset=sorted(family),
                    radius=sample.radius,
                    sample_index=sample.index,
                    point=_point(sample.x, sample.y),
                    rank_center=_rank(dict(zip(labels, sys.gradients(labels, x, y))), family, sys.m, cfg.tol_rank),
                    rank_sample=r,
                )
                return _report(CQName.RCPLD, act, Verdict.FAILS, cfg, certificate, coverage, sampler.restriction)
    return _report(CQName.RCPLD, act, Verdict.HOLDS_ON_SAMPLES, cfg, certificate, coverage, sampler.restriction)


def build_solution_system(
    problem: ParametricProblem,
    x_ref: Sequence[float],
    mode: ValueMode,
    solver: LowerLevelSolver,
    phi_hat: Optional[float] = None,
) -> ParametricSystem:
    """``Gamma`` augmented with ``h0 = f - phi`` (label 0); ``phi`` is re-solved per parameter."""
    vc = solver.value_constraint(x_ref, mode)
    if not np.isfinite(vc.phi_ref):
        raise LowerLevelUnsolved("lower-level problem has no solution at the reference parameter", x=list(vc.x_ref))
    if phi_hat is not None:
        vc = type(vc)(vc.f, vc.mode, vc.x_ref, float(phi_hat), vc.phi, vc.solutions)
    return problem.sys.with_value_constraint(vc)


def realizable_supports(
    problem: ParametricProblem, x: np.ndarray, y: np.ndarray, active: Sequence[int], cfg: AnalysisConfig
) -> List[Tuple[Tuple[int, ...], Dict[str, float]]]:
    """Supports ``T`` of multipliers in ``Lambda(x, y)`` with ``lambda_i >= eps_pos`` on ``T``."""
    sys = problem.sys
    grad_f = problem.objective.grad_y(x, y)
    eq = sys.eq_labels
    G_eq = sys.gradients(eq, x, y)
    found = []
    for T in _subsets(active, cfg):
        G_T = sys.gradients(list(T), x, y)
        A = np.hstack([G_T.T, G_eq.T, -G_eq.T]) if (T or eq) else np.zeros((sys.m, 0))
        b = -grad_f - cfg.eps_pos * G_T.sum(axis=0)
        result = find_feasible(A, b, tol=cfg.tol_lp)
        if not result.feasible:
            continue
        s = result.x
        multipliers = {str(l): 0.0 for l in sys.labels}
        for i, label in enumerate(T):
            multipliers[str(label)] = float(cfg.eps_pos + s[i])
        for j, label in enumerate(eq):
            multipliers[str(label)] = float(s[len(T) + j] - s[len(T) + len(eq) + j])
        found.append((T, multipliers))
    return found


@log_execution_time(logger)
def check_rcpld_S_via_multipliers(
    problem: ParametricProblem,
    x_bar,
    y_bar,
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
    solver: Optional[LowerLevelSolver] = None,
) -> CQReport:
    """RCPLD of the solution-map system, decided through the supports of ``Lambda(x_bar, y_bar)``."""
    sys = problem.sys
    solver = solver or LowerLevelSolver(problem, cfg)
    x, y = sys.check_point(x_bar, y_bar)
    solution = solver.solve(x)
    if solution.empty:
        raise LowerLevelUnsolved("lower-level problem is infeasible at the reference parameter", x=x.tolist())
    warnings: List[str] = []
    if not solver.contains(x, y):
        warnings.append("reference point is not among the computed lower-level solutions")

    gamma = check_rcpld(sys, x, y, sampler, cfg)
    act = active_set(sys, x, y, cfg)
    notes = [EPS_POS_CAVEAT]
    if gamma.verdict == Verdict.FAILS:
        notes.append("RCPLD of the lower-level feasible set fails")
        return _report(CQName.RCPLD_S, act, Verdict.FAILS, cfg, gamma.certificate, gamma.coverage,
                       sampler.restriction, notes, warnings)

    basis = gamma.certificate.basis if gamma.certificate else []
    supports = realizable_supports(problem, x, y, act.indices, cfg)
    if not supports:
        notes.append("no Lagrange multiplier found at the reference point")
        return _report(CQName.RCPLD_S, act, Verdict.INCONCLUSIVE, cfg,
                       CQCertificate(family=act.indices, basis=basis), gamma.coverage,
                       sampler.restriction, notes, warnings)

    grad_f = problem.objective.grad_y(x, y)
    records: List[MultiplierSupport] = []
    checks: List[Tuple[MultiplierSupport, List[int]]] = []
    for T, multipliers in supports:
        pos = VecFamily.of([(VALUE_LABEL, grad_f)] + list(zip(T, sys.gradients(list(T), x, y))), dim=sys.m)
        dep, _ = positive_linear_dependent(pos, _family(sys, basis, x, y), cfg.tol_lp, cfg.tol_rank)
        record = MultiplierSupport(support=list(T), multipliers=multipliers, dependent_at_center=dep)
        records.append(record)
        if dep:
            checks.append((record, list(T) + list(basis)))

    # Omega = dom S: parameters where the lower-level problem has a solution
    admitted = _admitted_samples(sys, sampler, cfg, lambda sample: not solver.solve(sample.x).empty)
    labels = sorted(set(act.indices) | set(basis))
    certificate = CQCertificate(family=[VALUE_LABEL] + labels, basis=basis, supports=records)
    witness: Optional[RankWitness] = None
    for record, family in checks:
        record.stable = True
        for sample, ok in admitted:
            if not ok:
                continue
            rows = np.vstack(
                [problem.objective.grad_y(sample.x, sample.y)] + [sys.grad_y(l, sample.x, sample.y) for l in family]
            )
            r = matrix_rank(rows, cfg.tol_rank)
            if r == rows.shape[0]:
                record.stable = False
                if witness is None:
                    witness = RankWitness(
                        subset=[VALUE_LABEL] + sorted(family),
                        radius=sample.radius,
                        sample_index=sample.index,
                        point=_point(sample.x, sample.y),
                        rank_center=matrix_rank(
                            np.vstack([grad_f] + [sys.grad_y(l, x, y) for l in family]), cfg.tol_rank
                        ),
                        rank_sample=r,
                    )
                break

    verdict = Verdict.FAILS if witness is not None else Verdict.HOLDS_ON_SAMPLES
    certificate.witness = witness
    logger.info("RCPLD_S check finished", extra={"verdict": verdict.value, "supports": len(records)})
    return _report(CQName.RCPLD_S, act, verdict, cfg, certificate, _coverage(sampler, admitted),
                   sampler.restriction, notes, warnings)


def check_cq(
    name: CQName,
    problem: ParametricProblem,
    x_bar,
    y_bar,
    sampler: NeighborhoodSampler,
    cfg: AnalysisConfig,
    solver: Optional[LowerLevelSolver] = None,
) -> CQReport:
    """Dispatch one qualification by name."""
    sys = problem.sys
    if name == CQName.LICQ:
        return check_licq(sys, x_bar, y_bar, cfg)
    if name == CQName.MFCQ:
        return check_mfcq(sys, x_bar, y_bar, cfg)
    if name == CQName.RCRCQ:
        return check_rcrcq(sys, x_bar, y_bar, sampler, cfg)
    if name == CQName.RCPLD:
        return check_rcpld(sys, x_bar, y_bar, sampler, cfg)
    return check_rcpld_S_via_multipliers(problem, x_bar, y_bar, sampler, cfg, solver)
