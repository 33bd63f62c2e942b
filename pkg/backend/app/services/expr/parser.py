"""
Recursive-descent parser for the expression grammar.

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := ("-")* power
    power  := atom ("^" sint)?
    atom   := number | var | "(" expr ")"
    var    := ("x"|"y") uint
    sint   := ["-"] uint

``^`` is non-associative: ``a^2^3`` is rejected, write ``(a^2)^3``.
"""
import re
from dataclasses import dataclass
from typing import List, Optional

from app.core.exceptions import ExponentError, ExpressionSyntaxError, VariableIndexError
from app.services.expr.nodes import (
    MAX_EXPONENT,
    MIN_EXPONENT,
    Add,
    Const,
    Div,
    Expr,
    Mul,
    Neg,
    Pow,
    Sub,
    Var,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>[xy]\d+)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number, var, op, end
    text: str
    pos: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExpressionSyntaxError(
                f"unexpected character {text[pos]!r}", pos, ("number", "variable", "operator")
            )
        kind = match.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, match.group(), pos))
        pos = match.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class Parser:
    """Parses one expression declared over ``n`` parameters and ``m`` decision variables."""

    def __init__(self, text: str, n: int, m: int):
        if n < 0 or m < 0:
            raise ValueError("dimensions must be nonnegative")
        self.text = text
        self.n = n
        self.m = m
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.i]

    def _advance(self) -> Token:
        token = self.tokens[self.i]
        self.i += 1
        return token

    def _accept(self, op: str) -> Optional[Token]:
        token = self.current
        if token.kind == "op" and token.text == op:
            return self._advance()
        return None

    def _fail(self, message: str, *expected: str) -> ExpressionSyntaxError:
        token = self.current
        found = "end of input" if token.kind == "end" else repr(token.text)
        return ExpressionSyntaxError(f"{message}, found {found}", token.pos, expected)

    def parse(self) -> Expr:
        if self.current.kind == "end":
            raise self._fail("empty expression", "number", "variable", "(", "-")
        tree = self.expr()
        if self.current.kind != "end":
            raise self._fail("unexpected token", "+", "-", "*", "/", ")", "end of input")
        return tree

    def expr(self) -> Expr:
        node = self.term()
        while True:
            if self._accept("+"):
                node = Add(node, self.term())
            elif self._accept("-"):
                node = Sub(node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.factor()
        while True:
            if self._accept("*"):
                node = Mul(node, self.factor())
            elif self._accept("/"):
                node = Div(node, self.factor())
            else:
                return node

    def factor(self) -> Expr:
        negations = 0
        while self._accept("-"):
            negations += 1
        node = self.power()
        for _ in range(negations):
            node = Neg(node)
        return node

    def power(self) -> Expr:
        base = self.atom()
        if not self._accept("^"):
            return base
        exponent = self.sint()
        if self.current.kind == "op" and self.current.text == "^":
            raise self._fail("chained powers need parentheses", "+", "-", "*", "/", ")")
        return Pow(base, exponent)

    def sint(self) -> int:
        sign = -1 if self._accept("-") else 1
        token = self.current
        if token.kind != "number":
            raise self._fail("missing exponent", "integer")
        self._advance()
        if not token.text.isdigit():
            raise ExponentError(
                f"exponent {token.text!r} at position {token.pos} is not an integer",
                position=token.pos,
            )
        value = sign * int(token.text)
        if not MIN_EXPONENT <= value <= MAX_EXPONENT:
            raise ExponentError(
                f"exponent {value} at position {token.pos} outside [{MIN_EXPONENT}, {MAX_EXPONENT}]",
                position=token.pos,
            )
        return value

    def atom(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Const(float(token.text))
        if token.kind == "var":
            self._advance()
            axis, index = token.text[0], int(token.text[1:])
            bound = self.n if axis == "x" else self.m
            if not 1 <= index <= bound:
                raise VariableIndexError(axis, index, bound, position=token.pos)
            return Var(axis, index)
        if self._accept("("):
            node = self.expr()
            if not self._accept(")"):
                raise self._fail("unbalanced parenthesis", ")")
            return node
        raise self._fail("expected operand", "number", "variable", "(", "-")


def parse_expr(text: str, n: int, m: int) -> Expr:
    """Parse ``text`` into an expression tree over ``x1..xn`` and ``y1..ym``."""
    return Parser(text, n, m).parse()
