"""Arithmetic expressions for scalar fields in geometry spec files.

Expressions use ``+ - * / ^`` and parentheses (``^`` binds tightest and is
right-associative, then unary minus, then ``* /``, then ``+ -``), the functions
``sin cos exp log sqrt``, the constant ``pi`` and the coordinates ``x1``..``xd``.

Parsing, differentiation and vectorised evaluation are done by sympy. A token
pass in front of it checks identifiers and bracket structure so that errors
carry the line and column of the offending token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from tokenize import TokenError
from typing import Any, Callable, Sequence

import numpy as np
import sympy
from sympy.parsing.sympy_parser import auto_number, convert_xor, parse_expr

from app.core.errors import ExpressionDomainError, ExpressionSyntaxError, UnknownIdentifierError

FUNCTIONS: dict[str, Any] = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "exp": sympy.exp,
    "log": sympy.log,
    "sqrt": sympy.sqrt,
}
CONSTANTS: dict[str, Any] = {"pi": sympy.pi}

_TRANSFORMATIONS = (auto_number, convert_xor)
_TOKEN = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()])"
)
_VARIABLE = re.compile(r"x([1-9]\d*)")
_BINARY = ("+", "*", "/", "^")
_NON_FINITE = (sympy.zoo, sympy.nan, sympy.oo, -sympy.oo, sympy.I)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        char = text[pos]
        if char == "\n":
            line, line_start, pos = line + 1, pos + 1, pos + 1
            continue
        if char.isspace():
            pos += 1
            continue
        match = _TOKEN.match(text, pos)
        if match is None:
            raise ExpressionSyntaxError(f"unexpected character '{char}'", line, pos - line_start + 1)
        kind = match.lastgroup or "op"
        tokens.append(Token(kind, match.group(), line, pos - line_start + 1))
        pos = match.end()
    tokens.append(Token("end", "", line, pos - line_start + 1))
    return tokens


def symbol(index: int) -> sympy.Symbol:
    """Coordinate symbol for the 0-based ``index``."""
    return sympy.Symbol(f"x{index + 1}", real=True)


@lru_cache(maxsize=4096)
def _compile(expr: sympy.Expr, indices: tuple[int, ...]) -> Callable[..., Any]:
    return sympy.lambdify([symbol(i) for i in indices], expr, "numpy")


def _indices(expr: sympy.Expr) -> tuple[int, ...]:
    return tuple(sorted(int(s.name[1:]) - 1 for s in expr.free_symbols))


def _numeric(expr: sympy.Expr, x: np.ndarray) -> np.ndarray:
    indices = _indices(expr)
    return np.asarray(_compile(expr, indices)(*(x[..., i] for i in indices)), dtype=np.float64)


@dataclass(frozen=True)
class Expression:
    """Parsed scalar field, a thin wrapper over a sympy expression."""

    sym: sympy.Expr
    tokens: tuple[Token, ...] = field(default=(), compare=False, repr=False)

    @classmethod
    def constant(cls, value: float) -> Expression:
        return cls(sympy.Float(value) if value != int(value) else sympy.Integer(int(value)))

    def variables(self) -> set[int]:
        return set(_indices(self.sym))

    def derivative(self, k: int) -> Expression:
        """Symbolic ∂/∂x_{k+1}."""
        return Expression(sympy.diff(self.sym, symbol(k)), self.tokens)

    def __neg__(self) -> Expression:
        return Expression(-self.sym, self.tokens)

    def _position(self, texts: tuple[str, ...]) -> tuple[int, int]:
        for token in self.tokens:
            if token.text in texts:
                return token.line, token.column
        return 1, 1

    @cached_property
    def _guards(self) -> list[sympy.Expr]:
        """Subexpressions with a restricted domain, innermost first."""
        return [
            node
            for node in sympy.postorder_traversal(self.sym)
            if isinstance(node, sympy.log)
            or (isinstance(node, sympy.Pow) and not (node.exp.is_Integer and node.exp >= 0))
        ]

    def _check_domain(self, x: np.ndarray) -> None:
        with np.errstate(all="ignore"):
            for node in self._guards:
                if isinstance(node, sympy.log):
                    if np.any(_numeric(node.args[0], x) <= 0):
                        raise ExpressionDomainError(
                            "log of a non-positive value", *self._position(("log",))
                        )
                    continue
                base, exponent = _numeric(node.base, x), _numeric(node.exp, x)
                if node.exp == sympy.Rational(1, 2) and np.any(base < 0):
                    raise ExpressionDomainError("sqrt of a negative value", *self._position(("sqrt",)))
                if np.any((base < 0) & (exponent != np.round(exponent))):
                    raise ExpressionDomainError(
                        "non-integer power of a negative number", *self._position(("^",))
                    )
                if np.any((base == 0) & (exponent < 0)):
                    if node.exp == -1:
                        raise ExpressionDomainError("division by zero", *self._position(("/",)))
                    raise ExpressionDomainError("negative power of zero", *self._position(("^", "/")))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Value at points x of shape (..., d)."""
        missing = [i for i in _indices(self.sym) if i >= x.shape[-1]]
        if missing:
            name = f"x{missing[0] + 1}"
            raise UnknownIdentifierError(f"unknown identifier '{name}'", *self._position((name,)))
        self._check_domain(x)
        return _numeric(self.sym, x)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.broadcast_to(self.evaluate(x), x.shape[:-1]).astype(np.float64)

    def __str__(self) -> str:
        return str(self.sym)


def _check_tokens(tokens: list[Token], dim: int | None) -> dict[str, Any]:
    """Validate identifiers and structure; return the names sympy may see."""
    names: dict[str, Any] = {}
    opened: list[Token] = []
    previous: Token | None = None
    for index, token in enumerate(tokens):
        following = tokens[index + 1] if index + 1 < len(tokens) else token
        operand_before = previous is not None and (
            previous.kind in ("number", "name") or previous.text == ")"
        )
        if token.kind == "end":
            if opened:
                bracket = opened[-1]
                raise ExpressionSyntaxError("unclosed '('", bracket.line, bracket.column)
            if not operand_before:
                raise ExpressionSyntaxError("unexpected end of input", token.line, token.column)
            break
        starts_operand = token.kind in ("number", "name") or token.text == "("
        if starts_operand and operand_before:
            raise ExpressionSyntaxError(f"unexpected '{token.text}'", token.line, token.column)
        if (token.text in _BINARY or token.text == ")") and not operand_before:
            raise ExpressionSyntaxError(f"unexpected '{token.text}'", token.line, token.column)
        if token.text == "(":
            opened.append(token)
        elif token.text == ")":
            if not opened:
                raise ExpressionSyntaxError("unmatched ')'", token.line, token.column)
            opened.pop()
        elif token.kind == "name":
            if following.text == "(":
                if token.text not in FUNCTIONS:
                    raise UnknownIdentifierError(
                        f"unknown function '{token.text}'", token.line, token.column
                    )
                names[token.text] = FUNCTIONS[token.text]
                # the call's bracket is part of the function token, not an operand
                previous = None
                continue
            if token.text in CONSTANTS:
                names[token.text] = CONSTANTS[token.text]
            else:
                match = _VARIABLE.fullmatch(token.text)
                index_ = int(match.group(1)) - 1 if match is not None else None
                if index_ is None or (dim is not None and index_ >= dim):
                    raise UnknownIdentifierError(
                        f"unknown identifier '{token.text}'", token.line, token.column
                    )
                names[token.text] = symbol(index_)
        previous = token
    return names


def parse_expression(text: str, dim: int | None = None) -> Expression:
    """Parse ``text``; with ``dim`` given, only x1..x{dim} are accepted as variables."""
    tokens = tokenize(text)
    names = _check_tokens(tokens, dim)
    source = " ".join(token.text for token in tokens)
    try:
        sym = parse_expr(source, local_dict=names, transformations=_TRANSFORMATIONS)
    except (SyntaxError, TokenError, TypeError) as exc:
        raise ExpressionSyntaxError(f"malformed expression: {exc}", 1, 1) from exc
    expr = Expression(sympy.sympify(sym), tuple(tokens))
    if expr.sym.has(*_NON_FINITE):
        raise ExpressionDomainError("expression is not a finite real number", 1, 1)
    return expr


def evaluate(text: str, point: Sequence[float] | np.ndarray, dim: int | None = None) -> float:
    """Convenience: parse and evaluate at a single point."""
    x = np.asarray(point, dtype=np.float64)
    return float(parse_expression(text, dim if dim is not None else x.shape[-1])(x))
