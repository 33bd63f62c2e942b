"""
Tests for the expression parser, printer, calculus and compiler.
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.core.exceptions import (
    DivisionByZeroError,
    ExponentError,
    ExpressionSyntaxError,
    VariableIndexError,
)
from app.services.expr import (
    Add,
    Const,
    CompiledExpr,
    Div,
    Mul,
    Neg,
    Pow,
    Sub,
    Var,
    diff,
    evaluate,
    parse_expr,
    simplify,
)
from app.services.expr.calculus import finite_difference

N, M = 2, 2

leaves = st.one_of(
    st.builds(Var, st.just("x"), st.integers(1, N)),
    st.builds(Var, st.just("y"), st.integers(1, M)),
    st.sampled_from([Const(0.0), Const(1.0), Const(2.0), Const(0.5), Const(3.0)]),
)


def trees(depth, max_exponent=2, division=False):
    if depth == 0:
        return leaves
    sub = trees(depth - 1, max_exponent, division)
    nodes = [
        leaves,
        st.builds(Add, sub, sub),
        st.builds(Sub, sub, sub),
        st.builds(Mul, sub, sub),
        st.builds(Neg, sub),
        st.builds(Pow, sub, st.integers(0, max_exponent)),
    ]
    if division:
        nodes.append(st.builds(Div, sub, sub))
    return st.one_of(*nodes)


expressions = trees(4, max_exponent=3)
smooth_expressions = trees(3)
rational_expressions = trees(5, max_exponent=3, division=True)
coords = st.floats(min_value=-1.5, max_value=1.5, allow_nan=False)


def test_parse_precedence():
    tree = parse_expr("x1 - y1*y1 + 2", 1, 1)
    assert tree == Add(Sub(Var("x", 1), Mul(Var("y", 1), Var("y", 1))), Const(2.0))


def test_unary_minus_binds_weaker_than_power():
    assert parse_expr("-y1^2", 0, 1) == Neg(Pow(Var("y", 1), 2))
    assert parse_expr("(-y1)^2", 0, 1) == Pow(Neg(Var("y", 1)), 2)


def test_print_round_trip_examples():
    for text in ["x1 - y1", "y1 - y1^2", "(x1 + y1 - 2)^2", "x1*y1 - y2", "-1 - y1", "(y1 + 1)^2 + (y2 - x1)^2"]:
        tree = parse_expr(text, 1, 2)
        assert parse_expr(str(tree), 1, 2) == tree


@given(expressions)
@settings(max_examples=500, deadline=None)
def test_print_parse_round_trip(tree):
    assert parse_expr(str(tree), N, M) == tree


@given(smooth_expressions, st.tuples(coords, coords), st.tuples(coords, coords), st.sampled_from([("x", 1), ("y", 1), ("y", 2)]))
@settings(max_examples=200, deadline=None)
def test_symbolic_derivative_matches_finite_difference(tree, x, y, variable):
    axis, index = variable
    exact = evaluate(diff(tree, axis, index), x, y)
    approx = finite_difference(tree, axis, index, x, y)
    assert abs(exact - approx) <= 1e-6 * (1.0 + abs(exact)) + 1e-7


def test_diff_of_square():
    tree = parse_expr("(x1 + y1 - 2)^2", 1, 1)
    assert evaluate(diff(tree, "y", 1), [0.25], [0.5]) == pytest.approx(2 * (0.25 + 0.5 - 2))


def test_simplify_drops_neutral_elements():
    y = Var("y", 1)
    assert simplify(Add(Mul(Const(1.0), y), Const(0.0))) == y
    assert simplify(Mul(Const(0.0), y)) == Const(0.0)


@given(rational_expressions, st.integers(0, 2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_simplify_preserves_values(tree, seed):
    simple = simplify(tree)
    points = np.random.default_rng(seed).uniform(-2.0, 2.0, size=(100, N + M))
    for point in points:
        x, y = point[:N], point[N:]
        try:
            expected = evaluate(tree, x, y)
        except DivisionByZeroError:
            continue
        if not np.isfinite(expected):
            continue
        assert evaluate(simple, x, y) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_syntax_error_reports_position():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expr("x1 + * y1", 1, 1)
    assert info.value.position == 5
    assert isinstance(info.value, ValueError)


def test_unbalanced_parenthesis():
    with pytest.raises(ExpressionSyntaxError):
        parse_expr("(x1 + y1", 1, 1)


def test_chained_power_rejected():
    with pytest.raises(ExpressionSyntaxError):
        parse_expr("y1^2^3", 0, 1)


def test_variable_outside_declared_range():
    with pytest.raises(VariableIndexError) as info:
        parse_expr("y3 - x1", 1, 2)
    assert isinstance(info.value, IndexError)
    assert info.value.details["index"] == 3


def test_non_integer_exponent():
    with pytest.raises(ExponentError):
        parse_expr("y1^1.5", 0, 1)


def test_exact_division_by_zero_raises():
    tree = parse_expr("1/y1", 0, 1)
    with pytest.raises(DivisionByZeroError):
        evaluate(tree, [], [0.0])


def test_compiled_matches_tree_and_batches():
    tree = parse_expr("(y1 + 1)^2 + (y2 - x1)^2", 1, 2)
    compiled = CompiledExpr(tree, 2)
    x = np.array([1.0])
    Y = np.array([[0.0, 1.0], [1.0, 0.0], [-1.0, 2.0]])
    assert compiled.batch(x, Y) == pytest.approx([evaluate(tree, x, y) for y in Y])
    assert compiled.grad_y(x, Y[0]) == pytest.approx([2.0, 0.0])
    assert compiled.hess_y(x, Y[0]) == pytest.approx(np.diag([2.0, 2.0]))


def test_compiled_constant_broadcasts_in_batch():
    compiled = CompiledExpr(parse_expr("0", 1, 1), 1)
    assert compiled.batch(np.array([0.0]), np.zeros((4, 1))).tolist() == [0.0] * 4
