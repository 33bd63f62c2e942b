"""
Exact symbolic differentiation and evaluation.

Simplification is deliberately narrow: ``0*a -> 0``, ``1*a -> a``,
``a+0 -> a`` (and the mirrored forms) plus folding of constant subtrees.
"""
from typing import List, Sequence

from app.core.exceptions import DimensionMismatchError, DivisionByZeroError
from app.services.expr.nodes import (
    Add,
    BinOp,
    Const,
    Div,
    Expr,
    Mul,
    Neg,
    Pow,
    Sub,
    Var,
    const,
    const_value,
    is_const,
)


def _is_value(e: Expr, value: float) -> bool:
    return is_const(e) and const_value(e) == value


def s_neg(a: Expr) -> Expr:
    if is_const(a):
        return const(-const_value(a))
    return Neg(a)


def s_add(a: Expr, b: Expr) -> Expr:
    if is_const(a) and is_const(b):
        return const(const_value(a) + const_value(b))
    if _is_value(b, 0.0):
        return a
    if _is_value(a, 0.0):
        return b
    return Add(a, b)


def s_sub(a: Expr, b: Expr) -> Expr:
    if is_const(a) and is_const(b):
        return const(const_value(a) - const_value(b))
    if _is_value(b, 0.0):
        return a
    if _is_value(a, 0.0):
        return s_neg(b)
    return Sub(a, b)


def s_mul(a: Expr, b: Expr) -> Expr:
    if is_const(a) and is_const(b):
        return const(const_value(a) * const_value(b))
    if _is_value(a, 0.0) or _is_value(b, 0.0):
        return Const(0.0)
    if _is_value(a, 1.0):
        return b
    if _is_value(b, 1.0):
        return a
    return Mul(a, b)


def s_div(a: Expr, b: Expr) -> Expr:
    if is_const(a) and is_const(b) and const_value(b) != 0.0:
        return const(const_value(a) / const_value(b))
    if _is_value(a, 0.0) and not _is_value(b, 0.0):
        return Const(0.0)
    if _is_value(b, 1.0):
        return a
    return Div(a, b)


def s_pow(a: Expr, k: int) -> Expr:
    if k == 0:
        return Const(1.0)
    if k == 1:
        return a
    if is_const(a):
        base = const_value(a)
        if base != 0.0 or k > 0:
            return const(base ** k)
    return Pow(a, k)


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up through the simplifying constructors."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Neg):
        return s_neg(simplify(e.operand))
    if isinstance(e, Pow):
        return s_pow(simplify(e.base), e.exponent)
    if isinstance(e, BinOp):
        left, right = simplify(e.left), simplify(e.right)
        return {
            Add: s_add,
            Sub: s_sub,
            Mul: s_mul,
            Div: s_div,
        }[type(e)](left, right)
    raise TypeError(f"unknown node {type(e).__name__}")


def diff(e: Expr, axis: str, index: int) -> Expr:
    """Partial derivative of ``e`` with respect to ``axis``-variable ``index``."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if (e.axis == axis and e.index == index) else 0.0)
    if isinstance(e, Neg):
        return s_neg(diff(e.operand, axis, index))
    if isinstance(e, Add):
        return s_add(diff(e.left, axis, index), diff(e.right, axis, index))
    if isinstance(e, Sub):
        return s_sub(diff(e.left, axis, index), diff(e.right, axis, index))
    if isinstance(e, Mul):
        return s_add(
            s_mul(diff(e.left, axis, index), e.right),
            s_mul(e.left, diff(e.right, axis, index)),
        )
    if isinstance(e, Div):
        da = diff(e.left, axis, index)
        db = diff(e.right, axis, index)
        numerator = s_sub(s_mul(da, e.right), s_mul(e.left, db))
        if _is_value(numerator, 0.0):
            return Const(0.0)
        return s_div(numerator, s_pow(e.right, 2))
    if isinstance(e, Pow):
        k = e.exponent
        du = diff(e.base, axis, index)
        if k == 0 or _is_value(du, 0.0):
            return Const(0.0)
        if k > 0:
            return s_mul(s_mul(const(k), s_pow(e.base, k - 1)), du)
        # k*u^(k-1)*u' written as k*u^(j-1)*u' / (u^j)^2 with j = -k keeps exponents in range
        j = -k
        numerator = s_mul(s_mul(const(k), s_pow(e.base, j - 1)), du)
        return s_div(numerator, s_pow(s_pow(e.base, j), 2))
    raise TypeError(f"unknown node {type(e).__name__}")


def grad(e: Expr, axis: str, dim: int) -> List[Expr]:
    """Symbolic gradient with respect to ``axis`` variables ``1..dim``."""
    return [diff(e, axis, j) for j in range(1, dim + 1)]


def _ipow(base: float, k: int, node: Expr) -> float:
    if k < 0:
        if base == 0.0:
            raise DivisionByZeroError(f"zero base raised to negative power in {node}", node=str(node))
        return 1.0 / _ipow(base, -k, node)
    result = 1.0
    while k:
        if k & 1:
            result *= base
        base *= base
        k >>= 1
    return result


def evaluate(e: Expr, x: Sequence[float], y: Sequence[float]) -> float:
    """Evaluate ``e`` at ``(x, y)`` by walking the tree."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        values = x if e.axis == "x" else y
        if e.index > len(values):
            raise DimensionMismatchError(
                f"{e} needs {e.axis} of length >= {e.index}, got {len(values)}"
            )
        return float(values[e.index - 1])
    if isinstance(e, Neg):
        return -evaluate(e.operand, x, y)
    if isinstance(e, Pow):
        return _ipow(evaluate(e.base, x, y), e.exponent, e)
    left = evaluate(e.left, x, y)
    right = evaluate(e.right, x, y)
    if isinstance(e, Add):
        return left + right
    if isinstance(e, Sub):
        return left - right
    if isinstance(e, Mul):
        return left * right
    if isinstance(e, Div):
        if right == 0.0:
            raise DivisionByZeroError(f"division by zero in {e}", node=str(e))
        return left / right
    raise TypeError(f"unknown node {type(e).__name__}")


def finite_difference(e: Expr, axis: str, index: int, x: Sequence[float], y: Sequence[float], step: float = 1e-5) -> float:
    """Central difference quotient, used to cross-check ``diff``."""
    def shifted(delta: float) -> float:
        xs, ys = list(x), list(y)
        target = xs if axis == "x" else ys
        target[index - 1] += delta
        return evaluate(e, xs, ys)

    return (shifted(step) - shifted(-step)) / (2.0 * step)
