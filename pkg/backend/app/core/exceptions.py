"""
Typed errors raised by the analysis services.

Every error derives from ``RegKitError`` so the HTTP layer and the CLI can map
them uniformly; builtin bases are kept where a caller may reasonably expect one.
"""
from typing import Any, Dict, Iterable, Optional


class RegKitError(Exception):
    """Base class for all toolkit errors."""

    code: str = "regkit_error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code, "detail": self.message, **self.details}


class ExpressionSyntaxError(RegKitError, ValueError):
    code = "syntax_error"

    def __init__(self, message: str, position: int, expected: Iterable[str] = ()):
        expected = tuple(expected)
        text = f"{message} at position {position}"
        if expected:
            text += f" (expected {', '.join(expected)})"
        super().__init__(text, position=position, expected=list(expected))
        self.position = position
        self.expected = expected


class VariableIndexError(RegKitError, IndexError):
    code = "index_error"

    def __init__(self, axis: str, index: int, bound: int, position: Optional[int] = None):
        super().__init__(
            f"variable {axis}{index} outside declared range 1..{bound}",
            axis=axis,
            index=index,
            bound=bound,
            position=position,
        )


class ExponentError(RegKitError, ValueError):
    code = "exponent_error"


class DivisionByZeroError(RegKitError, ZeroDivisionError):
    code = "division_by_zero"


class DimensionMismatchError(RegKitError, ValueError):
    code = "dimension_mismatch"


class PreconditionViolation(RegKitError, ValueError):
    code = "precondition_violation"


class SubsetCapExceeded(RegKitError):
    code = "subset_cap_exceeded"


class LowerLevelUnsolved(RegKitError):
    code = "lower_level_unsolved"


class LPFailure(RegKitError):
    code = "lp_failure"


class DegenerateDirection(RegKitError, ValueError):
    code = "degenerate_direction"


class GridTooLarge(RegKitError, ValueError):
    code = "grid_too_large"


class AllNodesInfeasible(RegKitError):
    code = "all_nodes_infeasible"


class ProblemFileError(RegKitError):
    code = "problem_file_error"

    def __init__(self, message: str, line: Optional[int] = None, **details: Any):
        text = f"line {line}: {message}" if line is not None else message
        super().__init__(text, line=line, **details)
        self.line = line
