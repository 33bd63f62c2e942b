"""
Reproduction suite for the bundled examples.

Each expectation runs one analysis on a bundled problem and compares the
verdict or the numbers against the known closed-form answer.
"""
import hashlib
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import AnalysisConfig
from app.core.exceptions import ProblemFileError, RegKitError
from app.core.logging import get_logger
from app.core.serialization import canonical_dumps
from app.schemas.bilevel import CalmnessVerdict
from app.schemas.cq import CQName, Restriction, Verdict
from app.schemas.geometry import IscVerdict, RegularityVerdict
from app.schemas.parametric import GridSpec
from app.schemas.report import ReproduceCheck, ReproduceReport
from app.services.bilevel import check_partial_calmness, solve_optimistic
from app.services.cq import check_cq
from app.services.geometry import estimate_rregularity, inner_semicontinuity_probe
from app.services.parametric import LowerLevelSolver, lipschitz_scan, s_map_probes, scan
from app.services.problems import ALIASES, LoadedProblem, load_problem
from app.services.sampling import NeighborhoodSampler

logger = get_logger(__name__)

Outcome = Tuple[bool, str, Any]

KAPPA_GROWTH = 100.0
# projection round-off; at an isolated branch the ratio is exactly proportional to 1/r
GROWTH_RTOL = 1e-6
SOLUTION_TOL = 1e-3
VALUE_TOL = 1e-4
MULTIPLIER_TOL = 1e-6


def kappa_grows(small: float, large: float) -> bool:
    """Whether the modulus at the smallest radius is at least KAPPA_GROWTH times the one at the largest."""
    return small >= KAPPA_GROWTH * large * (1.0 - GROWTH_RTOL)


@dataclass(frozen=True)
class Expectation:
    example: str
    name: str
    check: Callable[[LoadedProblem, AnalysisConfig, LowerLevelSolver], Outcome]


def _point(loaded: LoadedProblem, name: str) -> Tuple[np.ndarray, np.ndarray]:
    point = loaded.document.points[name]
    return np.asarray(point.x, dtype=float), np.asarray(point.y, dtype=float)


def _sampler(loaded: LoadedProblem, name: str, cfg: AnalysisConfig, omega: Restriction) -> NeighborhoodSampler:
    x, y = _point(loaded, name)
    return NeighborhoodSampler.from_config(x, y, cfg, omega)


def _node(grid_scan, x: float):
    return min(grid_scan.nodes, key=lambda node: abs(node.x[0] - x))


# ex32_gamma

def _rreg_verdict(point: str, expected: RegularityVerdict, growth: bool = False):
    def check(loaded, cfg, solver) -> Outcome:
        x, y = _point(loaded, point)
        estimate = estimate_rregularity(loaded.problem.sys, x, y, _sampler(loaded, point, cfg, Restriction.DOM), cfg)
        ok = estimate.verdict == expected
        detail = f"verdict {estimate.verdict.value}"
        if growth:
            small, large = estimate.kappa(cfg.radii[-1]), estimate.kappa(cfg.radii[0])
            ok = ok and kappa_grows(small, large)
            detail += f", kappa(r_min)={small:.4g}, kappa(r_max)={large:.4g}"
        elif expected == RegularityVerdict.CONSISTENT:
            kappas = [r.max_ratio for r in estimate.records if r.ratios]
            if kappas:
                ok = ok and max(kappas) < cfg.consistent_spread * max(min(kappas), 1e-300)
                detail += f", spread {max(kappas) / max(min(kappas), 1e-300):.3g}"
        return ok, detail, estimate

    return check


def _cq_verdict(point: str, name: CQName, expected: Verdict):
    def check(loaded, cfg, solver) -> Outcome:
        x, y = _point(loaded, point)
        report = check_cq(name, loaded.problem, x, y, _sampler(loaded, point, cfg, Restriction.FULL), cfg, solver)
        return report.verdict == expected, f"verdict {report.verdict.value}", report

    return check


def _isc_verdict(point: str, expected: IscVerdict):
    def check(loaded, cfg, solver) -> Outcome:
        x, y = _point(loaded, point)
        estimate = inner_semicontinuity_probe(
            loaded.problem.sys, x, y, _sampler(loaded, point, cfg, Restriction.DOM), cfg
        )
        return estimate.verdict == expected, f"verdict {estimate.verdict.value}", estimate

    return check


# ex_jump

def _jump_scan(loaded, cfg, solver) -> Outcome:
    grid_scan = scan(loaded.problem, GridSpec.parse("-1:2:61"), cfg, solver)
    bad = [
        node.x[0]
        for node in grid_scan.nodes
        if (node.x[0] >= 0 and abs(node.phi) > cfg.solution_value_tol) or (node.x[0] < 0 and np.isfinite(node.phi))
    ]
    report = lipschitz_scan(grid_scan, cfg, solver=solver)
    ok = not bad and not report.discontinuities
    return ok, f"mismatched nodes {bad}, discontinuities {len(report.discontinuities)}", report


def _jump_smap(omega: Restriction, expected: RegularityVerdict):
    def check(loaded, cfg, solver) -> Outcome:
        x, y = _point(loaded, "origin")
        report = s_map_probes(loaded.problem, x, y, _sampler(loaded, "origin", cfg, omega), cfg, solver)
        verdict = report.rreg_probe.verdict
        return verdict == expected, f"S-map verdict {verdict.value}", report.rreg_probe

    return check


# ex412_bilinear

EX412_PIECES = ((-2.0, -0.5, (-0.5, 1.0)), (-0.5, -1.0, (-1.0, 0.5)), (0.5, 0.0, (0.0, 0.0)))


def _ex412_scan(loaded, cfg, solver) -> Outcome:
    grid_scan = scan(loaded.problem, GridSpec.parse("-2:3:61"), cfg, solver)
    problems: List[str] = []
    for x, phi, y in EX412_PIECES:
        node = _node(grid_scan, x)
        if abs(node.phi - phi) > VALUE_TOL:
            problems.append(f"phi({x})={node.phi:.6g}")
        if not any(np.linalg.norm(np.asarray(rep) - y) <= SOLUTION_TOL for rep in node.representatives):
            problems.append(f"S({x})={node.representatives}")
    report = lipschitz_scan(grid_scan, cfg, solver=solver)
    step = 5.0 / 60.0
    if not any(abs(d.location[0]) <= step for d in report.discontinuities):
        problems.append("no discontinuity flagged at 0")
    return not problems, "; ".join(problems) or "pieces and jump reproduced", report


# ex_qp

def _qp_multipliers(point: str):
    def check(loaded, cfg, solver) -> Outcome:
        x, y = _point(loaded, point)
        report = check_cq(
            CQName.RCPLD_S, loaded.problem, x, y, _sampler(loaded, point, cfg, Restriction.FULL), cfg, solver
        )
        expected = np.array([2.0, max(-2.0 * x[0], 0.0)])
        supports = report.certificate.supports if report.certificate else []
        found = [np.array([s.multipliers["1"], s.multipliers["2"]]) for s in supports]
        ok = bool(found) and all(np.max(np.abs(lam - expected)) <= MULTIPLIER_TOL for lam in found)
        return ok, f"multipliers {[lam.tolist() for lam in found]}", report

    return check


# ex42_bilevel

def _ex42_optimistic(loaded, cfg, solver) -> Outcome:
    result = solve_optimistic(loaded.bilevel, cfg, solver=solver)
    ok = (
        abs(result.x[0] - 0.25) <= SOLUTION_TOL
        and abs(result.y[0] - 0.5) <= SOLUTION_TOL
        and abs(result.value - 0.5) <= SOLUTION_TOL
    )
    return ok, f"x*={result.x}, y*={result.y}, F*={result.value:.6g}", result


def _calmness(point: str, expected: CalmnessVerdict, kappa_cap: Optional[float] = None):
    def check(loaded, cfg, solver) -> Outcome:
        x, y = _point(loaded, point)
        sampler = _sampler(loaded, point, cfg, Restriction.FULL)
        report = check_partial_calmness(loaded.bilevel, x, y, sampler, cfg, solver=solver)
        ok = report.overall == expected
        if kappa_cap is not None:
            ok = ok and report.kappa_min is not None and report.kappa_min <= kappa_cap
        return ok, f"verdict {report.overall.value}, kappa_min {report.kappa_min}", report

    return check


# halfspace

def _halfspace_kappa(loaded, cfg, solver) -> Outcome:
    x, y = _point(loaded, "origin")
    estimate = estimate_rregularity(loaded.problem.sys, x, y, _sampler(loaded, "origin", cfg, Restriction.FULL), cfg)
    kappas = [r.max_ratio for r in estimate.records if r.ratios]
    ok = estimate.verdict == RegularityVerdict.CONSISTENT and all(abs(k - 1.0) <= 1e-2 for k in kappas)
    return ok, f"kappa estimates {kappas}", estimate


EXPECTATIONS: List[Expectation] = [
    Expectation("ex32_gamma", "rreg origin (dom)", _rreg_verdict("origin", RegularityVerdict.LIKELY_NOT, True)),
    Expectation("ex32_gamma", "rreg top (dom)", _rreg_verdict("top", RegularityVerdict.CONSISTENT)),
    Expectation("ex32_gamma", "rcpld origin", _cq_verdict("origin", CQName.RCPLD, Verdict.HOLDS_ON_SAMPLES)),
    Expectation("ex32_gamma", "rcpld top", _cq_verdict("top", CQName.RCPLD, Verdict.HOLDS_ON_SAMPLES)),
    Expectation("ex32_gamma", "isc origin", _isc_verdict("origin", IscVerdict.LIKELY_NOT)),
    Expectation("ex32_gamma", "isc top", _isc_verdict("top", IscVerdict.LIKELY)),
    Expectation("ex_jump", "phi scan", _jump_scan),
    Expectation("ex_jump", "S-map rreg (full)", _jump_smap(Restriction.FULL, RegularityVerdict.LIKELY_NOT)),
    Expectation("ex_jump", "S-map rreg (dom)", _jump_smap(Restriction.DOM, RegularityVerdict.CONSISTENT)),
    Expectation("ex412_bilinear", "phi/S pieces", _ex412_scan),
    Expectation("ex_qp", "rcpld_s positive", _cq_verdict("positive", CQName.RCPLD_S, Verdict.FAILS)),
    Expectation("ex_qp", "rcpld_s negative", _cq_verdict("negative", CQName.RCPLD_S, Verdict.HOLDS_ON_SAMPLES)),
    Expectation("ex_qp", "multipliers positive", _qp_multipliers("positive")),
    Expectation("ex_qp", "multipliers negative", _qp_multipliers("negative")),
    Expectation("ex42_bilevel", "optimistic solve", _ex42_optimistic),
    Expectation("ex42_bilevel", "calm at global", _calmness("global", CalmnessVerdict.CALM, kappa_cap=100.0)),
    Expectation("ex42_bilevel", "not calm at local", _calmness("local", CalmnessVerdict.LIKELY_NOT)),
    Expectation("ex41_box", "calm at minimizer", _calmness("minimizer", CalmnessVerdict.CALM)),
    Expectation("halfspace", "kappa equals one", _halfspace_kappa),
]


def examples() -> List[str]:
    return sorted({e.example for e in EXPECTATIONS})


def resolve_examples(names: Optional[Sequence[str]]) -> List[str]:
    if not names:
        return examples()
    resolved = []
    for name in names:
        canonical = ALIASES.get(name, name)
        if canonical not in examples():
            raise ProblemFileError(f"unknown example {name!r}", available=examples())
        resolved.append(canonical)
    return resolved


def run_reproduce(cfg: AnalysisConfig, names: Optional[Sequence[str]] = None) -> ReproduceReport:
    """Run every expectation of the selected examples (all of them by default)."""
    selected = resolve_examples(names)
    report = ReproduceReport()
    loaded: Dict[str, LoadedProblem] = {}
    solvers: Dict[str, LowerLevelSolver] = {}
    for expectation in EXPECTATIONS:
        if expectation.example not in selected:
            continue
        if expectation.example not in loaded:
            loaded[expectation.example] = load_problem(expectation.example)
            solvers[expectation.example] = LowerLevelSolver(loaded[expectation.example].problem, cfg)
        start = time.perf_counter()
        try:
            passed, detail, payload = expectation.check(
                loaded[expectation.example], cfg, solvers[expectation.example]
            )
            digest = hashlib.sha256(canonical_dumps(payload).encode("utf-8")).hexdigest()
        except RegKitError as exc:
            passed, detail, digest = False, f"{exc.code}: {exc.message}", None
        seconds = round(time.perf_counter() - start, 3)
        logger.info(
            "reproduce check",
            extra={"example": expectation.example, "check": expectation.name, "passed": passed},
        )
        report.checks.append(
            ReproduceCheck(
                example=expectation.example,
                name=expectation.name,
                passed=bool(passed),
                detail=detail,
                payload_digest=digest,
                seconds=seconds,
            )
        )
    return report
