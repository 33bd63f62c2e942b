"""
Tests for the constraint-qualification checks.
"""
import numpy as np
import pytest

from app.core.config import AnalysisConfig
from app.core.exceptions import SubsetCapExceeded
from app.models.system import ValueMode
from app.schemas.cq import CQName, Restriction, Verdict
from app.schemas.parametric import LowerSolution
from app.services.cq import (
    active_set,
    build_solution_system,
    check_cq,
    check_licq,
    check_mfcq,
    check_rcpld,
    check_rcpld_S_via_multipliers,
    check_rcrcq,
)
from app.services.kernel import matrix_rank
from app.services.parametric import LowerLevelSolver
from app.services.problems import bundled_problems
from app.services.sampling import NeighborhoodSampler

from factories import PARAMETER_DRAWS, graph_points, make_system

# Gamma(x) = {y : y2 <= 0, y2 >= y1^2} = {0}; the pair of gradients is
# positively dependent at the origin and independent for y1 != 0.
PINCHED = make_system(1, 2, ineq=["-y2", "y2 - y1^2"])


def sampler_at(x, y, cfg):
    return NeighborhoodSampler.from_config(x, y, cfg)


def test_active_set_uses_absolute_tolerance():
    sys = make_system(1, 1, ineq=["y1", "y1 - 1"])
    act = active_set(sys, [0.0], [1e-8], AnalysisConfig())
    assert act.indices == [1]
    assert act.feasible


def test_licq_holds_for_single_halfspace(cfg):
    sys = make_system(1, 1, ineq=["y1"])
    report = check_licq(sys, [0.0], [0.0], cfg)
    assert report.verdict == Verdict.HOLDS
    assert report.active_set == [1]
    assert report.certificate.rank == 1


def test_licq_fails_with_more_active_than_dimension(bundled, cfg):
    sys = bundled("ex32").problem.sys
    report = check_licq(sys, [0.0], [0.0], cfg)
    assert report.verdict == Verdict.FAILS
    assert report.active_set == [1, 2]
    assert report.certificate.rank == 1


def test_mfcq_fails_on_opposite_gradients(cfg):
    sys = make_system(0, 1, ineq=["y1", "-y1"])
    report = check_mfcq(sys, [], [0.0], cfg)
    assert report.verdict == Verdict.FAILS
    assert report.certificate.pld is not None
    assert report.certificate.pld.residual < 1e-8


def test_mfcq_vacuous_without_active_constraints(cfg):
    sys = make_system(1, 1, ineq=["y1"])
    report = check_mfcq(sys, [0.0], [-1.0], cfg)
    assert report.verdict == Verdict.HOLDS
    assert report.active_set == []
    assert "no active constraints" in report.notes


def test_infeasible_reference_point_is_flagged(cfg):
    sys = make_system(1, 1, ineq=["y1"])
    report = check_licq(sys, [0.0], [1.0], cfg)
    assert report.warnings and "infeasible" in report.warnings[0]


def test_rcpld_holds_on_one_dimensional_pair(bundled, cfg):
    sys = bundled("ex32").problem.sys
    for y in ([0.0], [1.0]):
        report = check_rcpld(sys, [0.0], y, sampler_at([0.0], y, cfg), cfg)
        assert report.verdict == Verdict.HOLDS_ON_SAMPLES
        assert report.certificate.basis == []
        assert [1, 2] in report.certificate.dependent_subsets or [2, 3] in report.certificate.dependent_subsets
        assert all(c.checked == cfg.samples_per_radius for c in report.coverage)


def test_rcpld_fails_when_dependence_breaks_nearby(cfg):
    report = check_rcpld(PINCHED, [0.0], [0.0, 0.0], sampler_at([0.0], [0.0, 0.0], cfg), cfg)
    assert report.verdict == Verdict.FAILS
    witness = report.certificate.witness
    assert witness.subset == [1, 2]
    assert witness.rank_center == 1
    assert witness.rank_sample == 2


def test_rcrcq_detects_rank_jump(cfg):
    report = check_rcrcq(PINCHED, [0.0], [0.0, 0.0], sampler_at([0.0], [0.0, 0.0], cfg), cfg)
    assert report.verdict == Verdict.FAILS
    assert report.certificate.witness.rank_sample > report.certificate.witness.rank_center


def test_rcrcq_holds_for_constant_ranks(bundled, cfg):
    sys = bundled("ex32").problem.sys
    report = check_rcrcq(sys, [0.0], [0.0], sampler_at([0.0], [0.0], cfg), cfg)
    assert report.verdict == Verdict.HOLDS_ON_SAMPLES


def test_rank_witness_reverifies_at_its_point(cfg):
    report = check_rcpld(PINCHED, [0.0], [0.0, 0.0], sampler_at([0.0], [0.0, 0.0], cfg), cfg)
    witness = report.certificate.witness
    at_sample = PINCHED.gradients(witness.subset, np.asarray(witness.point.x), np.asarray(witness.point.y))
    at_center = PINCHED.gradients(witness.subset, np.zeros(1), np.zeros(2))
    assert matrix_rank(at_sample, cfg.tol_rank) == witness.rank_sample
    assert matrix_rank(at_center, cfg.tol_rank) == witness.rank_center
    assert abs(witness.point.x[0]) <= witness.radius + 1e-12


@pytest.mark.parametrize("original,scaled,y", [
    (["x1 - y1", "y1 - y1^2", "y1 - 1"], ["2*(x1 - y1)", "5*(y1 - y1^2)", "0.5*(y1 - 1)"], [0.0]),
    (["x1 - y1", "y1 - y1^2", "y1 - 1"], ["2*(x1 - y1)", "5*(y1 - y1^2)", "0.5*(y1 - 1)"], [1.0]),
    (["-y2", "y2 - y1^2"], ["-3*y2", "0.5*(y2 - y1^2)"], [0.0, 0.0]),
])
def test_verdicts_survive_positive_rescaling(cfg, original, scaled, y):
    m = len(y)
    base, stretched = make_system(1, m, ineq=original), make_system(1, m, ineq=scaled)
    sampler = sampler_at([0.0], y, cfg)
    for check in (check_licq, check_mfcq):
        assert check(base, [0.0], y, cfg).verdict == check(stretched, [0.0], y, cfg).verdict
    for check in (check_rcrcq, check_rcpld):
        first, second = check(base, [0.0], y, sampler, cfg), check(stretched, [0.0], y, sampler, cfg)
        assert first.verdict == second.verdict
        assert first.active_set == second.active_set


@pytest.mark.parametrize("name,point", [
    ("ex32", "origin"), ("ex32", "top"), ("ex_qp", "positive"), ("ex_qp", "negative"),
    ("halfspace", "origin"), ("ex412", "origin"),
])
def test_qualification_implications(bundled, name, point):
    """LICQ => MFCQ => RCPLD and RCRCQ => RCPLD at every reference point."""
    cfg = AnalysisConfig(samples_per_radius=20, restarts=4)
    loaded = bundled(name)
    ref = loaded.document.points[point]
    sys = loaded.problem.sys
    sampler = sampler_at(ref.x, ref.y, cfg)
    licq = check_licq(sys, ref.x, ref.y, cfg).verdict
    mfcq = check_mfcq(sys, ref.x, ref.y, cfg).verdict
    rcrcq = check_rcrcq(sys, ref.x, ref.y, sampler, cfg).verdict
    rcpld = check_rcpld(sys, ref.x, ref.y, sampler, cfg).verdict
    if licq == Verdict.HOLDS:
        assert mfcq == Verdict.HOLDS
    if mfcq == Verdict.HOLDS or rcrcq == Verdict.HOLDS_ON_SAMPLES:
        assert rcpld != Verdict.FAILS


@pytest.mark.parametrize("name", sorted(bundled_problems()))
def test_qualification_implications_along_the_graph(bundled, name):
    cfg = AnalysisConfig(samples_per_radius=10, restarts=4)
    problem = bundled(name).problem
    for x, y in graph_points(problem, PARAMETER_DRAWS[name], 50, 19, cfg):
        sampler = sampler_at(x, y, cfg)
        licq = check_licq(problem.sys, x, y, cfg).verdict
        mfcq = check_mfcq(problem.sys, x, y, cfg).verdict
        rcrcq = check_rcrcq(problem.sys, x, y, sampler, cfg).verdict
        rcpld = check_rcpld(problem.sys, x, y, sampler, cfg).verdict
        if licq == Verdict.HOLDS:
            assert mfcq == Verdict.HOLDS
        if mfcq == Verdict.HOLDS or rcrcq == Verdict.HOLDS_ON_SAMPLES:
            assert rcpld != Verdict.FAILS


def test_subset_cap_is_enforced(bundled):
    cfg = AnalysisConfig(subset_cap=1, samples_per_radius=10)
    sys = bundled("ex32").problem.sys
    with pytest.raises(SubsetCapExceeded) as info:
        check_rcpld(sys, [0.0], [0.0], sampler_at([0.0], [0.0], cfg), cfg)
    assert info.value.details["cap"] == 1


def test_solution_system_violates_mfcq_at_solutions(bundled, cfg):
    loaded = bundled("ex_qp")
    solver = LowerLevelSolver(loaded.problem, cfg)
    for point in ("positive", "negative"):
        ref = loaded.document.points[point]
        sys_s = build_solution_system(loaded.problem, ref.x, ValueMode.INEQ, solver)
        report = check_mfcq(sys_s, ref.x, ref.y, cfg)
        assert 0 in report.active_set
        assert report.verdict == Verdict.FAILS


@pytest.mark.parametrize("name", sorted(bundled_problems()))
def test_solution_system_violates_mfcq_along_solutions(bundled, name):
    # active set read at the accuracy of the lower-level solves
    cfg = AnalysisConfig(samples_per_radius=10, restarts=4, tol_act=1e-5)
    problem = bundled(name).problem
    solver = LowerLevelSolver(problem, cfg)
    rng = np.random.default_rng(23)
    for _ in range(50):
        x = PARAMETER_DRAWS[name](rng)
        y = solver.solve(x).representatives[0]
        sys_s = build_solution_system(problem, x, ValueMode.INEQ, solver)
        report = check_mfcq(sys_s, x, y, cfg)
        assert 0 in report.active_set
        assert report.verdict == Verdict.FAILS


def test_rcpld_s_on_quadratic_problem(bundled, cfg):
    loaded = bundled("ex_qp")
    solver = LowerLevelSolver(loaded.problem, cfg)
    positive = loaded.document.points["positive"]
    negative = loaded.document.points["negative"]

    fails = check_rcpld_S_via_multipliers(
        loaded.problem, positive.x, positive.y, sampler_at(positive.x, positive.y, cfg), cfg, solver
    )
    holds = check_rcpld_S_via_multipliers(
        loaded.problem, negative.x, negative.y, sampler_at(negative.x, negative.y, cfg), cfg, solver
    )

    assert fails.verdict == Verdict.FAILS
    assert fails.certificate.witness.subset[0] == 0
    assert holds.verdict == Verdict.HOLDS_ON_SAMPLES
    supports = {tuple(s.support): s.multipliers for s in holds.certificate.supports}
    assert (1, 2) in supports
    assert supports[(1, 2)]["1"] == pytest.approx(2.0, abs=1e-6)
    assert supports[(1, 2)]["2"] == pytest.approx(2.0, abs=1e-6)


class LeftSolvableSolver(LowerLevelSolver):
    """Pretends the lower level has no solution for ``x1 > -1``."""

    def solve(self, x):
        if x[0] > -1.0:
            return LowerSolution(x=[float(v) for v in x], phi=float("inf"), representatives=[], empty=True)
        return super().solve(x)


def test_rcpld_s_admits_samples_by_lower_level_solvability(bundled, cfg):
    loaded = bundled("ex_qp")
    negative = loaded.document.points["negative"]
    sampler = NeighborhoodSampler.from_config(negative.x, negative.y, cfg, restriction=Restriction.DOM)
    report = check_rcpld_S_via_multipliers(
        loaded.problem, negative.x, negative.y, sampler, cfg, LeftSolvableSolver(loaded.problem, cfg)
    )
    assert report.verdict == Verdict.HOLDS_ON_SAMPLES
    assert all(0 < c.checked < c.samples for c in report.coverage)


def test_check_cq_dispatches_by_name(bundled, cfg):
    loaded = bundled("halfspace")
    sampler = sampler_at([0.0], [0.0], cfg)
    report = check_cq(CQName.LICQ, loaded.problem, [0.0], [0.0], sampler, cfg)
    assert report.cq_name == CQName.LICQ
    assert report.tolerances["tol_act"] == cfg.tol_act
