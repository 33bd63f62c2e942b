"""
Command dispatch shared by the CLI and the HTTP API.

Each command takes a loaded problem, run options and an analysis config and
returns a ``RunReport`` whose payload is byte-stable under a fixed seed.
"""
import hashlib
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from app.core import config as config_module
from app.core.config import AnalysisConfig
from app.core.exceptions import PreconditionViolation
from app.core.logging import AnalysisContext, get_logger
from app.core.metrics import track_analysis
from app.core.serialization import canonical_dumps
from app.models.problem import BilevelProblem
from app.schemas.parametric import GridAxis, GridSpec
from app.schemas.problem import PointSpec
from app.schemas.report import RunOptions, RunReport
from app.services.bilevel import (
    calmness_sufficient_conditions,
    check_partial_calmness,
    default_grid,
    pessimistic_existence_report,
    solve_optimistic,
)
from app.services.cq import check_cq
from app.services.geometry import (
    estimate_rregularity,
    inner_semicontinuity_probe,
    multiplier_bound_scan,
    uniform_rregularity_scan,
)
from app.services.parametric import LowerLevelSolver, hypotheses_of, lipschitz_scan, s_map_probes, scan
from app.services.problems import LoadedProblem, dump_problem, resolve_point
from app.services.sampling import NeighborhoodSampler

logger = get_logger(__name__)

SCAN_STEPS = 61


@dataclass
class AnalysisJob:
    loaded: LoadedProblem
    options: RunOptions
    cfg: AnalysisConfig
    solver: LowerLevelSolver

    @property
    def problem(self):
        return self.loaded.problem

    @property
    def bilevel(self) -> BilevelProblem:
        if self.loaded.bilevel is None:
            raise PreconditionViolation(f"problem {self.loaded.name!r} declares no upper level")
        return self.loaded.bilevel

    def point(self, ref=None) -> Tuple[np.ndarray, np.ndarray]:
        ref = self.options.point if ref is None else ref
        if ref is None:
            raise PreconditionViolation("this command needs --point", named=sorted(self.loaded.document.points))
        if isinstance(ref, PointSpec):
            return self.problem.sys.check_point(ref.x, ref.y)
        return resolve_point(self.loaded, ref)

    def sampler(self, x: np.ndarray, y: np.ndarray) -> NeighborhoodSampler:
        return NeighborhoodSampler.from_config(x, y, self.cfg, self.options.omega)

    def grid(self) -> GridSpec:
        if self.options.grid:
            try:
                return GridSpec.parse(self.options.grid)
            except (ValueError, ValidationError) as exc:
                raise PreconditionViolation(f"malformed grid {self.options.grid!r}: expected lo:hi:steps[,...]") from exc
        if self.loaded.bilevel is not None:
            return default_grid(self.loaded.bilevel.box, SCAN_STEPS)
        half = self.cfg.box
        return GridSpec(axes=[GridAxis(lo=-half, hi=half, steps=SCAN_STEPS) for _ in range(self.problem.n)])


def _check_cq(job: AnalysisJob) -> Any:
    x, y = job.point()
    return check_cq(job.options.cq, job.problem, x, y, job.sampler(x, y), job.cfg, job.solver)


def _probe_rreg(job: AnalysisJob) -> Any:
    x, y = job.point()
    return estimate_rregularity(job.problem.sys, x, y, job.sampler(x, y), job.cfg)


def _probe_isc(job: AnalysisJob) -> Any:
    x, y = job.point()
    return inner_semicontinuity_probe(job.problem.sys, x, y, job.sampler(x, y), job.cfg)


def _probe_smap(job: AnalysisJob) -> Any:
    x, y = job.point()
    return s_map_probes(job.problem, x, y, job.sampler(x, y), job.cfg, job.solver)


def _probe_multipliers(job: AnalysisJob) -> Any:
    x, y = job.point()
    return multiplier_bound_scan(job.problem.sys, x, y, job.sampler(x, y), job.cfg)


def _uniform_scan(job: AnalysisJob) -> Any:
    refs: Sequence = job.options.points or sorted(job.loaded.document.points)
    if not refs:
        raise PreconditionViolation("uniform scan needs graph points (--point or named points in the file)")
    points = [job.point(ref) for ref in refs]
    return uniform_rregularity_scan(job.problem.sys, points, job.sampler(*points[0]), job.cfg)


def _scan(job: AnalysisJob) -> Any:
    grid_scan = scan(job.problem, job.grid(), job.cfg, job.solver)
    report = lipschitz_scan(grid_scan, job.cfg, solver=job.solver, hypotheses=hypotheses_of(job.problem))
    return {"scan": grid_scan, "lipschitz": report}


def _solve_opt(job: AnalysisJob) -> Any:
    grid = job.grid() if job.options.grid else None
    return solve_optimistic(job.bilevel, job.cfg, grid, job.options.refine_rounds, job.solver)


def _calmness(job: AnalysisJob) -> Any:
    x, y = job.point()
    sampler = job.sampler(x, y)
    report = check_partial_calmness(job.bilevel, x, y, sampler, job.cfg, job.options.kappa_grid, job.solver)
    if not job.options.sufficient:
        return report
    conditions = calmness_sufficient_conditions(job.bilevel, x, y, sampler, job.cfg, job.solver)
    return {"calmness": report, "sufficient_conditions": conditions}


def _existence(job: AnalysisJob) -> Any:
    grid = job.grid() if job.options.grid else None
    return pessimistic_existence_report(job.bilevel, job.cfg, grid, job.solver)


COMMANDS: Dict[str, Callable[[AnalysisJob], Any]] = {
    "check-cq": _check_cq,
    "probe-rreg": _probe_rreg,
    "probe-isc": _probe_isc,
    "probe-smap": _probe_smap,
    "probe-multipliers": _probe_multipliers,
    "uniform-scan": _uniform_scan,
    "scan": _scan,
    "solve-opt": _solve_opt,
    "calmness": _calmness,
    "existence": _existence,
}


def input_digest(loaded: LoadedProblem, options: RunOptions) -> str:
    body = dump_problem(loaded.document) + "\n" + canonical_dumps(options)
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def run_analysis(
    command: str,
    loaded: LoadedProblem,
    options: RunOptions,
    cfg: AnalysisConfig,
    argv: Optional[List[str]] = None,
) -> RunReport:
    """Run one command and wrap its result in the report envelope."""
    if command not in COMMANDS:
        raise PreconditionViolation(f"unknown command {command!r}", available=sorted(COMMANDS))
    AnalysisContext.set_context(command=command, seed=cfg.seed)
    job = AnalysisJob(loaded=loaded, options=options, cfg=cfg, solver=LowerLevelSolver(loaded.problem, cfg))

    start = time.perf_counter()
    with track_analysis(command):
        payload = COMMANDS[command](job)
    elapsed = time.perf_counter() - start
    logger.info("analysis finished", extra={"problem": loaded.name, "duration_ms": round(elapsed * 1000, 2)})

    return RunReport(
        tool_version=config_module.settings.VERSION,
        seed=cfg.seed,
        tolerances=cfg.tolerance_block(),
        command=argv if argv is not None else [command, loaded.name],
        input_digest=input_digest(loaded, options),
        payload=payload,
        wall_time_s=round(elapsed, 3),
    )


def payload_bytes(report: RunReport) -> str:
    """The deterministic part of a report."""
    return canonical_dumps(report.payload)
