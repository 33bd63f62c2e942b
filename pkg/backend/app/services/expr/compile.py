"""
Compile expression trees into numpy-aware closures.

The closures take ``x`` of shape ``(n,)`` and ``y`` of shape ``(m,)`` or
``(m, k)`` (a batch of ``k`` points stored column-wise) and broadcast like the
underlying numpy arithmetic. Division by zero yields ``inf``/``nan`` here;
the exact evaluator in ``calculus`` raises instead.
"""
from functools import cached_property
from typing import Callable, List

import numpy as np

from app.services.expr.calculus import grad
from app.services.expr.nodes import Add, Const, Div, Expr, Mul, Neg, Pow, Sub, Var

Compiled = Callable[[np.ndarray, np.ndarray], np.ndarray]


def compile_expr(e: Expr) -> Compiled:
    if isinstance(e, Const):
        value = float(e.value)
        return lambda x, y: value
    if isinstance(e, Var):
        i = e.index - 1
        if e.axis == "x":
            return lambda x, y: x[i]
        return lambda x, y: y[i]
    if isinstance(e, Neg):
        f = compile_expr(e.operand)
        return lambda x, y: -f(x, y)
    if isinstance(e, Pow):
        f = compile_expr(e.base)
        k = e.exponent
        if k == 2:
            def square(x, y):
                v = f(x, y)
                return v * v
            return square
        return lambda x, y: np.power(f(x, y), float(k))
    f, g = compile_expr(e.left), compile_expr(e.right)
    if isinstance(e, Add):
        return lambda x, y: f(x, y) + g(x, y)
    if isinstance(e, Sub):
        return lambda x, y: f(x, y) - g(x, y)
    if isinstance(e, Mul):
        return lambda x, y: f(x, y) * g(x, y)
    if isinstance(e, Div):
        return lambda x, y: np.divide(f(x, y), g(x, y))
    raise TypeError(f"unknown node {type(e).__name__}")


class CompiledExpr:
    """An expression with lazily compiled value, y-gradient and y-Hessian."""

    def __init__(self, expr: Expr, m: int):
        self.expr = expr
        self.m = m
        self._value = compile_expr(expr)

    @cached_property
    def grad_exprs(self) -> List[Expr]:
        return grad(self.expr, "y", self.m)

    @cached_property
    def hess_exprs(self) -> List[List[Expr]]:
        return [grad(g, "y", self.m) for g in self.grad_exprs]

    @cached_property
    def _grad(self) -> List[Compiled]:
        return [compile_expr(g) for g in self.grad_exprs]

    @cached_property
    def _hess(self) -> List[List[Compiled]]:
        return [[compile_expr(h) for h in row] for row in self.hess_exprs]

    def value(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self._value(x, y))

    def batch(self, x: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Values at the rows of ``Y`` (shape ``(k, m)``)."""
        out = self._value(x, Y.T)
        return np.broadcast_to(np.asarray(out, dtype=float), (Y.shape[0],)).copy()

    def grad_y(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.array([float(g(x, y)) for g in self._grad])

    def hess_y(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.array([[float(h(x, y)) for h in row] for row in self._hess])
