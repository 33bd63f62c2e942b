"""
Tests for the bilevel layer: value functions, optimistic solve, partial calmness
and the pessimistic-existence report.
"""
import math

import numpy as np
import pytest

from app.core.config import AnalysisConfig
from app.core.exceptions import AllNodesInfeasible
from app.models.problem import BilevelProblem, Box
from app.schemas.bilevel import CalmnessVerdict, KappaOutcome
from app.schemas.parametric import GridSpec
from app.services.bilevel import (
    calmness_sufficient_conditions,
    check_partial_calmness,
    default_grid,
    pessimistic_existence_report,
    phi_opt_pess,
    solve_optimistic,
)
from app.services.expr import parse_expr
from app.services.parametric import LowerLevelSolver, grid_points
from app.services.sampling import NeighborhoodSampler

from factories import make_problem


@pytest.fixture
def box_problem(bundled):
    return bundled("ex41").bilevel


def test_default_grid_spans_the_box(box_problem):
    grid = default_grid(box_problem.box)
    assert grid.axes[0].lo == 0.5
    assert grid.axes[0].hi == 2.0
    assert grid.axes[0].steps == 31


def test_value_functions_on_empty_image(box_problem, cfg):
    values = phi_opt_pess(box_problem, [-1.0], cfg)
    assert values.empty
    assert values.phi_o == math.inf
    assert values.phi_p == -math.inf


def test_value_functions_on_single_valued_map(box_problem, cfg):
    values = phi_opt_pess(box_problem, [1.5], cfg)
    assert not values.empty
    assert values.phi_o == pytest.approx(0.25, abs=1e-6)
    assert values.phi_p == pytest.approx(values.phi_o)


@pytest.mark.parametrize("name", ["ex41", "ex42"])
def test_optimistic_value_never_exceeds_pessimistic(bundled, cfg, name):
    problem = bundled(name).bilevel
    solver = LowerLevelSolver(problem.lower, cfg)
    for _, x in grid_points(default_grid(problem.box)):
        values = phi_opt_pess(problem, x, cfg, solver)
        assert not values.empty
        assert values.phi_o <= values.phi_p


def test_optimistic_solve_on_box_problem(box_problem, cfg):
    solution = solve_optimistic(box_problem, cfg, refine_rounds=1)
    assert solution.x[0] == pytest.approx(1.0, abs=1e-3)
    assert solution.value == pytest.approx(0.0, abs=1e-5)
    assert len(solution.incumbents) == 2
    assert all(b <= a for a, b in zip(solution.incumbents, solution.incumbents[1:]))
    assert solution.infeasible_nodes == 0


def test_optimistic_solve_without_feasible_nodes(box_problem, cfg):
    with pytest.raises(AllNodesInfeasible):
        solve_optimistic(box_problem, cfg, grid=GridSpec.parse("-2:-1:3"), refine_rounds=0)


@pytest.mark.slow
def test_optimistic_solve_finds_global_minimizer(bundled, full_cfg):
    solution = solve_optimistic(bundled("ex42").bilevel, full_cfg)
    assert solution.x[0] == pytest.approx(0.25, abs=1e-3)
    assert solution.y[0] == pytest.approx(0.5, abs=1e-3)


def test_calm_at_box_minimizer(box_problem, cfg):
    sampler = NeighborhoodSampler.from_config([1.0], [0.0], cfg)
    report = check_partial_calmness(box_problem, [1.0], [0.0], sampler, cfg)
    assert report.overall == CalmnessVerdict.CALM
    assert report.kappa_min == cfg.kappa_grid[0]
    assert all(v.outcome == KappaOutcome.NO_VIOLATION for v in report.per_kappa)
    assert report.warnings == []
    assert sum(report.samples_used.values()) > 0


def test_penalty_cannot_repair_a_non_minimizer(box_problem, cfg):
    sampler = NeighborhoodSampler.from_config([1.5], [0.0], cfg)
    report = check_partial_calmness(box_problem, [1.5], [0.0], sampler, cfg, kappa_grid=[1.0, 100.0])
    assert report.overall == CalmnessVerdict.LIKELY_NOT
    assert report.kappa_min is None
    assert all(v.persistent for v in report.per_kappa)
    assert report.per_kappa[0].witness.margin < 0
    assert any("local optimistic minimizer" in w for w in report.warnings)


def test_calmness_witnesses_reproduce_their_margin(box_problem, cfg):
    solver = LowerLevelSolver(box_problem.lower, cfg)
    sampler = NeighborhoodSampler.from_config([1.5], [0.0], cfg)
    report = check_partial_calmness(box_problem, [1.5], [0.0], sampler, cfg, kappa_grid=[1.0, 100.0], solver=solver)
    violations = [v for v in report.per_kappa if v.outcome == KappaOutcome.VIOLATION]
    assert violations
    for verdict in violations:
        w = verdict.witness
        x, y = np.asarray(w.x), np.asarray(w.y)
        u = max(0.0, box_problem.lower.objective.value(x, y) - solver.phi(x))
        margin = box_problem.upper.value(x, y) - report.reference_value + verdict.kappa * u
        assert w.u == pytest.approx(u, abs=1e-9)
        assert w.margin == pytest.approx(margin, abs=1e-9)
        assert w.margin < -cfg.delta_viol


def test_violations_only_at_the_largest_radius_do_not_block_calmness(cfg):
    # F drops below F(0, 0) only for |x1| > 0.01, out of reach of the two smallest radii
    problem = BilevelProblem(
        F=parse_expr("x1^2 - 10000*x1^4 + y1^2", 1, 1),
        box=Box(lower=(-1.0,), upper=(1.0,)),
        lower=make_problem(1, 1, "0", ineq=["y1^2 - 1"]),
    )
    sampler = NeighborhoodSampler.from_config([0.0], [0.0], cfg)
    report = check_partial_calmness(problem, [0.0], [0.0], sampler, cfg)
    assert report.overall == CalmnessVerdict.CALM
    assert report.kappa_min == cfg.kappa_grid[0]
    first = report.per_kappa[0]
    assert first.outcome == KappaOutcome.VIOLATION
    assert not first.persistent
    assert first.violating_radii == [cfg.radii[0]]


@pytest.mark.slow
def test_calmness_distinguishes_global_and_local_minimizers(bundled, full_cfg):
    problem = bundled("ex42").bilevel
    solver = LowerLevelSolver(problem.lower, full_cfg)
    calm = check_partial_calmness(
        problem, [0.25], [0.5], NeighborhoodSampler.from_config([0.25], [0.5], full_cfg), full_cfg, solver=solver
    )
    not_calm = check_partial_calmness(
        problem, [1.375], [0.625], NeighborhoodSampler.from_config([1.375], [0.625], full_cfg), full_cfg,
        solver=solver,
    )
    assert calm.overall == CalmnessVerdict.CALM
    assert calm.kappa_min <= 100.0
    assert not_calm.overall == CalmnessVerdict.LIKELY_NOT


def test_sufficient_condition_for_convex_bounded_lower_level(box_problem, cfg):
    sampler = NeighborhoodSampler.from_config([1.0], [0.0], cfg)
    report = calmness_sufficient_conditions(box_problem, [1.0], [0.0], sampler, cfg)
    names = {c.name: c for c in report.conditions}
    assert names["convex_bounded_rcpld_s_at_solutions"].met
    assert report.any_met
    assert report.hypotheses.convex_in_y_asserted


def test_existence_report_on_feasible_box(box_problem):
    cfg = AnalysisConfig(samples_per_radius=20, restarts=4)
    report = pessimistic_existence_report(box_problem, cfg, grid=GridSpec.parse("0.5:2:4"))
    assert report.x_in_dom
    assert report.single_valued
    assert report.rcpld_s_checks
    assert report.all_hypotheses_pass
    assert report.pessimistic_x == pytest.approx([1.0])
    assert report.pessimistic_value == pytest.approx(0.0, abs=1e-6)


def test_existence_report_flags_parameters_outside_domain(box_problem):
    cfg = AnalysisConfig(samples_per_radius=20, restarts=4)
    report = pessimistic_existence_report(box_problem, cfg, grid=GridSpec.parse("-1:1:3"))
    assert not report.x_in_dom
    assert report.infeasible_nodes == [[-1.0]]
    assert not report.all_hypotheses_pass
