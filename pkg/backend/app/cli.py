"""
Command-line driver.

Reports go to stdout (or ``--output``), logs to stderr. Exit codes: 0 success,
1 a reproduction expectation was not met, 2 usage or input error.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from app.core import config as config_module
from app.core.config import AnalysisConfig, get_analysis_config
from app.core.exceptions import RegKitError
from app.core.logging import AnalysisContext, configure_logging, get_logger
from app.core.monitoring import capture_exception, init_sentry
from app.core.serialization import canonical_dumps
from app.schemas.cq import CQName, Restriction
from app.schemas.report import ReproduceReport, RunOptions
from app.services.parametric import export_scan_csv
from app.services.problems import load_problem
from app.services.reproduce import run_reproduce
from app.services.runner import COMMANDS, run_analysis

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _add_sampler_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--radii", type=_floats, help="descending radii, e.g. 0.1,0.01,0.001")
    parser.add_argument("--samples", type=int, help="samples per radius")
    parser.add_argument("--seed", type=int, help="sampling seed (default from REGKIT_SEED)")
    parser.add_argument("--omega", choices=[r.value for r in (Restriction.FULL, Restriction.DOM)], default="full",
                        help="parameter set the samples are restricted to")


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--output", type=Path, help="write the report to this file instead of stdout")
    parser.add_argument("--threads", type=int, help="worker threads for independent solves")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regkit",
        description="Numerical verification of constraint qualifications, R-regularity and bilevel calmness",
    )
    parser.add_argument("--log-level", default=None, help="override LOG_LEVEL")
    parser.add_argument("--log-format", choices=["json", "console"], default=None)
    sub = parser.add_subparsers(dest="verb", required=True)

    validate = sub.add_parser("validate", help="parse and check a problem file")
    validate.add_argument("problem", help="problem file path or bundled name")

    for verb, help_text in (
        ("check-cq", "check a constraint qualification at a point"),
        ("probe-rreg", "estimate R-regularity of Gamma at a point"),
        ("probe-isc", "estimate inner semicontinuity of Gamma at a point"),
        ("probe-smap", "estimate R-regularity and semicontinuity of the solution map"),
        ("probe-multipliers", "bound multipliers of projections near a point"),
        ("uniform-scan", "uniform R-regularity estimate over several graph points"),
        ("calmness", "sampled partial calmness test at a bilevel point"),
    ):
        cmd = sub.add_parser(verb, help=help_text)
        cmd.add_argument("problem", help="problem file path or bundled name")
        cmd.add_argument("--point", action="append",
                         help="named reference point or comma list x..., y... (repeatable for uniform-scan)")
        _add_sampler_flags(cmd)
        _add_output_flags(cmd)
        if verb == "check-cq":
            cmd.add_argument("--cq", choices=[c.value for c in CQName], default=CQName.RCPLD.value)
        if verb == "calmness":
            cmd.add_argument("--kappa-grid", type=_floats, help="penalty parameters to test")
            cmd.add_argument("--sufficient", action="store_true",
                             help="also evaluate the RCPLD-based sufficient conditions")

    for verb, help_text in (
        ("scan", "scan phi and S over a parameter grid"),
        ("solve-opt", "solve the optimistic bilevel problem on a grid"),
        ("existence", "check the hypotheses for pessimistic existence"),
    ):
        cmd = sub.add_parser(verb, help=help_text)
        cmd.add_argument("problem", help="problem file path or bundled name")
        cmd.add_argument("--grid", help='"lo:hi:steps[,lo:hi:steps...]"')
        _add_sampler_flags(cmd)
        _add_output_flags(cmd)
        if verb == "scan":
            cmd.add_argument("--out", choices=["json", "csv"], default="json")
        if verb == "solve-opt":
            cmd.add_argument("--refine-rounds", type=int)

    reproduce = sub.add_parser("reproduce", help="run the bundled example expectations")
    reproduce.add_argument("examples", nargs="*", help="example names or aliases")
    reproduce.add_argument("--all", action="store_true", help="run every example")
    reproduce.add_argument("--seed", type=int)
    reproduce.add_argument("--output", type=Path, help="also write the JSON report here")
    reproduce.add_argument("--threads", type=int)

    serve = sub.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    return parser


def _config(args: argparse.Namespace) -> AnalysisConfig:
    radii = getattr(args, "radii", None)
    kappa_grid = getattr(args, "kappa_grid", None)
    return get_analysis_config(
        radii=tuple(radii) if radii else None,
        samples_per_radius=getattr(args, "samples", None),
        seed=getattr(args, "seed", None),
        workers=getattr(args, "threads", None),
        kappa_grid=tuple(kappa_grid) if kappa_grid else None,
        refine_rounds=getattr(args, "refine_rounds", None),
    )


def _options(args: argparse.Namespace) -> RunOptions:
    points = getattr(args, "point", None) or []
    return RunOptions(
        point=points[0] if points else None,
        points=points,
        cq=getattr(args, "cq", CQName.RCPLD.value),
        omega=getattr(args, "omega", Restriction.FULL.value),
        grid=getattr(args, "grid", None),
        kappa_grid=getattr(args, "kappa_grid", None),
        refine_rounds=getattr(args, "refine_rounds", None),
        sufficient=getattr(args, "sufficient", False),
    )


def _emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(text + "\n")
    else:
        output.write_text(text + "\n", encoding="utf-8")
        logger.info("report written", extra={"path": str(output)})


def cmd_validate(args: argparse.Namespace) -> int:
    loaded = load_problem(args.problem)
    for warning in loaded.warnings:
        sys.stderr.write(f"warning: {warning}\n")
    _emit(
        canonical_dumps(
            {
                "name": loaded.name,
                "valid": True,
                "n": loaded.document.dims.n,
                "m": loaded.document.dims.m,
                "bilevel": loaded.bilevel is not None,
                "warnings": loaded.warnings,
            }
        ),
        None,
    )
    return EXIT_OK


def cmd_analysis(args: argparse.Namespace, argv: List[str]) -> int:
    loaded = load_problem(args.problem)
    report = run_analysis(args.verb, loaded, _options(args), _config(args), argv=argv)
    if args.verb == "scan" and args.out == "csv":
        _emit(export_scan_csv(report.payload["scan"]).rstrip("\n"), args.output)
    else:
        _emit(canonical_dumps(report), args.output)
    return EXIT_OK


def _table(report: ReproduceReport) -> str:
    width = max([len(f"{c.example} / {c.name}") for c in report.checks] + [10])
    lines = [f"{'check':<{width}}  result  seconds  detail"]
    for check in report.checks:
        label = f"{check.example} / {check.name}"
        status = "PASS" if check.passed else "FAIL"
        lines.append(f"{label:<{width}}  {status:<6}  {check.seconds:>7.2f}  {check.detail}")
    passed = sum(c.passed for c in report.checks)
    lines.append(f"{passed}/{len(report.checks)} checks passed")
    return "\n".join(lines)


def cmd_reproduce(args: argparse.Namespace) -> int:
    if not args.all and not args.examples:
        sys.stderr.write("error: name at least one example or pass --all\n")
        return EXIT_USAGE
    report = run_reproduce(_config(args), None if args.all else args.examples)
    sys.stdout.write(_table(report) + "\n")
    if args.output is not None:
        args.output.write_text(canonical_dumps(report) + "\n", encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    settings = config_module.settings
    uvicorn.run("app.main:app", host=args.host or settings.HOST, port=args.port or settings.PORT)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_format)
    init_sentry()
    AnalysisContext.set_context(command=args.verb)
    try:
        if args.verb == "validate":
            return cmd_validate(args)
        if args.verb == "reproduce":
            return cmd_reproduce(args)
        if args.verb == "serve":
            return cmd_serve(args)
        if args.verb in COMMANDS:
            return cmd_analysis(args, argv)
    except RegKitError as exc:
        logger.error("command failed", extra={"error": exc.code, "detail": exc.message})
        sys.stderr.write(f"error: {exc.code}: {exc.message}\n")
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        capture_exception(exc, context={"command": args.verb})
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
