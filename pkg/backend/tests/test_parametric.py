"""
Tests for lower-level solves, phi/S scans, the Lipschitz scan and the S-map checks.
"""
import csv
import io
import math

import numpy as np
import pytest

from app.core.config import AnalysisConfig
from app.core.exceptions import DimensionMismatchError, GridTooLarge, PreconditionViolation
from app.schemas.cq import Restriction
from app.schemas.geometry import RegularityVerdict
from app.schemas.parametric import GridSpec
from app.services.parametric import (
    LowerLevelSolver,
    export_scan_csv,
    hypotheses_of,
    lipschitz_scan,
    s_map_probes,
    scan,
    solve_lower,
)
from app.services.problems import bundled_problems
from app.services.sampling import NeighborhoodSampler

from factories import CONVEX_PROBLEMS, PARAMETER_DRAWS, grid_minimum, oracle_curve


def test_grid_spec_parsing():
    grid = GridSpec.parse("0:1:5, -1:1:3")
    assert [a.steps for a in grid.axes] == [5, 3]
    assert grid.size == 15


def test_grid_spec_rejects_empty_axis():
    with pytest.raises(ValueError):
        GridSpec.parse("0:1:0")


def test_solve_lower_quadratic(bundled, cfg):
    problem = bundled("ex_qp").problem
    sol = solve_lower(problem, [1.0], cfg)
    assert sol.phi == pytest.approx(1.0, abs=1e-6)
    assert len(sol.representatives) == 1
    assert sol.representatives[0] == pytest.approx([0.0, 1.0], abs=1e-6)
    assert solve_lower(problem, [-1.0], cfg).phi == pytest.approx(2.0, abs=1e-6)


def test_solve_lower_empty_image(bundled, cfg):
    sol = solve_lower(bundled("jump").problem, [-1.0], cfg)
    assert sol.empty
    assert math.isinf(sol.phi)
    assert sol.representatives == []


def test_solver_membership(bundled, cfg):
    solver = LowerLevelSolver(bundled("ex_qp").problem, cfg)
    assert solver.contains([1.0], [0.0, 1.0])
    assert not solver.contains([1.0], [0.0, 0.0])


def test_parameter_draws_cover_bundled_problems():
    assert set(PARAMETER_DRAWS) == set(bundled_problems())


@pytest.mark.parametrize("name", CONVEX_PROBLEMS)
def test_lower_level_value_matches_grid_minimum(bundled, cfg, name):
    problem = bundled(name).problem
    solver = LowerLevelSolver(problem, cfg)
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = np.asarray(PARAMETER_DRAWS[name](rng))
        expected = grid_minimum(problem.sys, x, lambda Y: problem.objective.batch(x, Y), oracle_curve(problem, x))
        sol = solve_lower(problem, x, cfg, solver)
        assert not sol.empty
        assert sol.phi == pytest.approx(expected, abs=2e-3)


def test_scan_of_jump_problem(bundled, cfg):
    result = scan(bundled("jump").problem, GridSpec.parse("-1:2:61"), cfg)
    assert len(result.nodes) == 61
    for node in result.nodes:
        if node.x[0] <= -0.05:
            assert math.isinf(node.phi)
            assert node.representatives == []
        elif node.x[0] >= 0.05:
            assert node.phi == pytest.approx(0.0, abs=1e-6)


def test_lipschitz_on_domain_of_jump_problem(bundled, cfg):
    problem = bundled("jump").problem
    solver = LowerLevelSolver(problem, cfg)
    result = scan(problem, GridSpec.parse("-1:2:61"), cfg, solver)
    report = lipschitz_scan(result, cfg, solver=solver, hypotheses=hypotheses_of(problem))
    assert report.lipschitz_on_dom
    assert report.modulus == pytest.approx(0.0, abs=1e-6)
    assert report.hypotheses.convex_in_y_asserted


def test_bisection_localises_phi_jump(bundled, cfg):
    problem = bundled("ex412").problem
    solver = LowerLevelSolver(problem, cfg)
    result = scan(problem, GridSpec.parse("-2:3:61"), cfg, solver)
    report = lipschitz_scan(result, cfg, solver=solver)
    assert not report.lipschitz_on_dom
    jump = report.discontinuities[0]
    assert abs(jump.location[0]) < 0.1
    assert jump.jump == pytest.approx(1.0, abs=1e-3)
    assert jump.final_slope > cfg.slope_cap


def test_lipschitz_window_restricts_modulus(bundled, cfg):
    problem = bundled("ex412").problem
    solver = LowerLevelSolver(problem, cfg)
    result = scan(problem, GridSpec.parse("-2:-1:13"), cfg, solver)
    report = lipschitz_scan(result, cfg, window=[[-2.0, -1.0]])
    # phi = 1/x on [-2, -1], so neighbour slopes stay below 1
    assert 0.25 < report.modulus <= 1.0 + 1e-6
    assert report.window == [[-2.0, -1.0]]


def test_scan_rejects_wrong_axis_count(bundled, cfg):
    with pytest.raises(DimensionMismatchError):
        scan(bundled("jump").problem, GridSpec.parse("0:1:3,0:1:3"), cfg)


def test_scan_rejects_oversized_grid(bundled):
    cfg = AnalysisConfig(max_grid_nodes=10)
    with pytest.raises(GridTooLarge) as info:
        scan(bundled("jump").problem, GridSpec.parse("0:1:11"), cfg)
    assert info.value.details["nodes"] == 11


def test_csv_export(bundled, cfg):
    result = scan(bundled("jump").problem, GridSpec.parse("-1:1:3"), cfg)
    rows = list(csv.reader(io.StringIO(export_scan_csv(result))))
    assert rows[0] == ["x1", "phi", "n_solutions", "y1"]
    assert len(rows) == 4
    assert rows[1][1] == "inf"
    assert rows[1][2] == "0"
    assert float(rows[3][1]) == pytest.approx(0.0, abs=1e-6)


def test_solution_map_regular_only_relative_to_domain(bundled, cfg):
    problem = bundled("jump").problem
    solver = LowerLevelSolver(problem, cfg)
    full = s_map_probes(problem, [0.0], [0.0], NeighborhoodSampler.from_config([0.0], [0.0], cfg), cfg, solver)
    dom = s_map_probes(
        problem,
        [0.0],
        [0.0],
        NeighborhoodSampler.from_config([0.0], [0.0], cfg, restriction=Restriction.DOM),
        cfg,
        solver,
    )
    assert full.rreg_probe.verdict == RegularityVerdict.LIKELY_NOT
    assert dom.rreg_probe.verdict == RegularityVerdict.CONSISTENT
    assert dom.hypotheses.probed["r_regularity"] == RegularityVerdict.CONSISTENT.value


def test_solution_map_checks_need_a_solution(bundled, cfg):
    with pytest.raises(PreconditionViolation):
        s_map_probes(
            bundled("jump").problem,
            [1.0],
            [0.5],
            NeighborhoodSampler.from_config([1.0], [0.5], cfg),
            cfg,
        )
