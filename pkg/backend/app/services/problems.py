"""
Problem files: loading, validation, model construction and canonical dumps.

A problem file is JSON (schema in ``app.schemas.problem``); bundled examples
live in ``app/problems`` and can be referenced by name or alias.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.core.exceptions import DimensionMismatchError, ProblemFileError, RegKitError
from app.core.logging import get_logger
from app.core.serialization import canonical_dumps
from app.models.problem import BilevelProblem, Box, ParametricProblem, ProblemFlags
from app.models.system import ParametricSystem
from app.schemas.problem import ProblemFile
from app.services.expr import parse_expr

logger = get_logger(__name__)

PROBLEMS_DIR = Path(__file__).resolve().parent.parent / "problems"

ALIASES: Dict[str, str] = {
    "ex32": "ex32_gamma",
    "ex41": "ex41_box",
    "jump": "ex_jump",
    "ex412": "ex412_bilinear",
    "qp": "ex_qp",
    "ex42": "ex42_bilevel",
    "ex42_lower": "ex42_bilevel",
}


@dataclass
class LoadedProblem:
    document: ProblemFile
    problem: ParametricProblem
    bilevel: Optional[BilevelProblem] = None
    warnings: List[str] = field(default_factory=list)
    source: Optional[str] = None

    @property
    def name(self) -> str:
        return self.document.name


def bundled_problems() -> Dict[str, Path]:
    return {path.stem: path for path in sorted(PROBLEMS_DIR.glob("*.json"))}


def resolve_problem_path(ref: Union[str, Path]) -> Path:
    """A filesystem path, or the name (or alias) of a bundled problem."""
    path = Path(ref)
    if path.is_file():
        return path
    name = ALIASES.get(str(ref), str(ref))
    bundled = bundled_problems()
    if name in bundled:
        return bundled[name]
    raise ProblemFileError(f"no problem file or bundled problem named {str(ref)!r}", available=sorted(bundled))


def parse_problem_text(text: str) -> ProblemFile:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    if not isinstance(raw, dict):
        raise ProblemFileError("top-level value must be an object", line=1)
    try:
        return ProblemFile.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ProblemFileError(f"{where}: {first['msg']}", errors=len(exc.errors())) from exc


def _parse_all(texts: List[str], n: int, m: int, where: str) -> Tuple:
    parsed = []
    for i, text in enumerate(texts, start=1):
        try:
            parsed.append(parse_expr(text, n, m))
        except RegKitError as exc:
            exc.details.setdefault("where", f"{where}[{i}]")
            raise
    return tuple(parsed)


def build_problem(document: ProblemFile, source: Optional[str] = None) -> LoadedProblem:
    """Parse every expression and build the lower-level (and optional bilevel) model."""
    n, m = document.dims.n, document.dims.m
    ineq = _parse_all(document.lower.ineq, n, m, "lower.ineq")
    eq = _parse_all(document.lower.eq, n, m, "lower.eq")
    (f,) = _parse_all([document.lower.objective], n, m, "lower.objective")
    flags = ProblemFlags(convex_in_y=document.flags.convex_in_y, locally_bounded=document.flags.locally_bounded)
    lower = ParametricProblem(sys=ParametricSystem(n=n, m=m, ineq=ineq, eq=eq), f=f, flags=flags, name=document.name)

    warnings: List[str] = []
    if not ineq and not eq:
        warnings.append("no constraints declared: Gamma(x) is the whole space")
    bilevel = None
    if document.upper is not None:
        (F,) = _parse_all([document.upper.objective], n, m, "upper.objective")
        try:
            box = Box(lower=tuple(document.upper.box.lower), upper=tuple(document.upper.box.upper))
        except ValueError as exc:
            if isinstance(exc, RegKitError):
                raise
            raise ProblemFileError(f"upper.box: {exc}") from exc
        bilevel = BilevelProblem(F=F, box=box, lower=lower)
    for message in warnings:
        logger.warning(message, extra={"problem": document.name})
    return LoadedProblem(document=document, problem=lower, bilevel=bilevel, warnings=warnings, source=source)


def load_problem(ref: Union[str, Path]) -> LoadedProblem:
    path = resolve_problem_path(ref)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from exc
    return build_problem(parse_problem_text(text), source=str(path))


def dump_problem(document: ProblemFile) -> str:
    return canonical_dumps(document)


def resolve_point(loaded: LoadedProblem, text: str) -> Tuple[np.ndarray, np.ndarray]:
    """A named reference point, or comma-separated numbers split as ``x`` then ``y``."""
    document = loaded.document
    if text in document.points:
        point = document.points[text]
        return np.asarray(point.x, dtype=float), np.asarray(point.y, dtype=float)
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ProblemFileError(
            f"point {text!r} is neither a named point nor a list of numbers",
            named=sorted(document.points),
        ) from exc
    n, m = document.dims.n, document.dims.m
    if len(values) != n + m:
        raise DimensionMismatchError(f"point has {len(values)} coordinates, expected n + m = {n + m}")
    return np.asarray(values[:n]), np.asarray(values[n:])
