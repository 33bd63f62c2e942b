"""
Expression tree for scalar functions of the joint variables (x, y).

Nodes are frozen dataclasses, so structural equality is ``==`` and trees are
hashable and safe to share between threads. ``str(node)`` prints source text
that parses back to an equal tree.
"""
from dataclasses import dataclass
from typing import Iterator, Set, Tuple

# binding strength used by the printer
PREC_ADD = 1
PREC_MUL = 2
PREC_NEG = 3
PREC_POW = 4
PREC_ATOM = 5


class Expr:
    """Base class of all expression nodes."""

    precedence: int = PREC_ATOM

    def children(self) -> Tuple["Expr", ...]:
        return ()

    def walk(self) -> Iterator["Expr"]:
        yield self
        for child in self.children():
            yield from child.walk()


def _format_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


@dataclass(frozen=True)
class Const(Expr):
    value: float

    @property
    def precedence(self) -> int:  # type: ignore[override]
        return PREC_NEG if self.value < 0 else PREC_ATOM

    def __str__(self) -> str:
        if self.value < 0:
            return "-" + _format_number(-self.value)
        return _format_number(self.value)


@dataclass(frozen=True)
class Var(Expr):
    axis: str  # "x" or "y"
    index: int  # 1-based

    def __str__(self) -> str:
        return f"{self.axis}{self.index}"


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    precedence = PREC_NEG

    def children(self) -> Tuple[Expr, ...]:
        return (self.operand,)

    def __str__(self) -> str:
        inner = str(self.operand)
        if self.operand.precedence < PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"


@dataclass(frozen=True)
class BinOp(Expr):
    left: Expr
    right: Expr
    symbol = "?"

    def children(self) -> Tuple[Expr, ...]:
        return (self.left, self.right)

    def __str__(self) -> str:
        left = str(self.left)
        right = str(self.right)
        if self.left.precedence < self.precedence:
            left = f"({left})"
        if self.right.precedence <= self.precedence:
            right = f"({right})"
        if self.precedence == PREC_ADD:
            return f"{left} {self.symbol} {right}"
        return f"{left}{self.symbol}{right}"


@dataclass(frozen=True)
class Add(BinOp):
    symbol = "+"
    precedence = PREC_ADD


@dataclass(frozen=True)
class Sub(BinOp):
    symbol = "-"
    precedence = PREC_ADD


@dataclass(frozen=True)
class Mul(BinOp):
    symbol = "*"
    precedence = PREC_MUL


@dataclass(frozen=True)
class Div(BinOp):
    symbol = "/"
    precedence = PREC_MUL


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int
    precedence = PREC_POW

    def children(self) -> Tuple[Expr, ...]:
        return (self.base,)

    def __str__(self) -> str:
        base = str(self.base)
        if self.base.precedence < PREC_ATOM:
            base = f"({base})"
        return f"{base}^{self.exponent}"


MIN_EXPONENT = -9
MAX_EXPONENT = 9


def const(value: float) -> Expr:
    """Constant node; negative values become ``Neg(Const(|c|))`` so printing round-trips."""
    value = float(value)
    if value < 0:
        return Neg(Const(-value))
    return Const(value + 0.0)  # drops the sign of -0.0


def var(axis: str, index: int) -> Var:
    return Var(axis, index)


def is_const(e: Expr) -> bool:
    if isinstance(e, Const):
        return True
    return isinstance(e, Neg) and is_const(e.operand)


def const_value(e: Expr) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Neg):
        return -const_value(e.operand)
    raise TypeError(f"{e} is not constant")


def variables(e: Expr) -> Set[Tuple[str, int]]:
    return {(node.axis, node.index) for node in e.walk() if isinstance(node, Var)}


def has_division(e: Expr) -> bool:
    """Whether a division or a negative power occurs (possible poles)."""
    return any(
        isinstance(node, Div) or (isinstance(node, Pow) and node.exponent < 0)
        for node in e.walk()
    )
