from app.services.expr.calculus import diff, evaluate, grad, simplify
from app.services.expr.compile import CompiledExpr, compile_expr
from app.services.expr.nodes import (
    Add,
    Const,
    Div,
    Expr,
    Mul,
    Neg,
    Pow,
    Sub,
    Var,
    const,
    has_division,
    var,
    variables,
)
from app.services.expr.parser import parse_expr

__all__ = [
    "Add",
    "CompiledExpr",
    "Const",
    "Div",
    "Expr",
    "Mul",
    "Neg",
    "Pow",
    "Sub",
    "Var",
    "compile_expr",
    "const",
    "diff",
    "evaluate",
    "grad",
    "has_division",
    "parse_expr",
    "simplify",
    "var",
    "variables",
]
