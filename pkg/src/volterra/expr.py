"""Scalar expression trees: parsing, evaluation and canonical printing.

The grammar is deliberately small.  Binary ``+ - * /`` are left associative,
``^`` is right associative and binds tighter than unary minus, so ``-2^2``
evaluates to ``-4`` and ``2^3^2`` to ``512``.  Function identifiers are fixed
(sin, cos, tan, exp, ln, abs, sqrt, min, max, arctan); ``pi`` and ``e`` are
folded into numeric literals at parse time.  There is no implicit
multiplication.

Evaluation works elementwise on numpy arrays as well as on floats, which is
what the quadrature layers rely on.  Everything is IEEE binary64; the only
deviations from raw IEEE are deliberate: ``ln`` of a nonpositive value,
``sqrt`` of a negative value and a negative base raised to a non-integer
power raise :class:`DomainError` instead of quietly producing NaN.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprError",
    "ParseError",
    "UnknownFunctionError",
    "UnboundVariableError",
    "DomainError",
    "parse",
    "evaluate",
    "render",
    "variables",
]


class ExprError(Exception):
    """Base class for everything the expression layer can raise."""


class ParseError(ExprError):
    """Malformed input.  Carries the offending position and what was expected."""

    def __init__(self, message: str, position: int, expected: str | None = None):
        self.position = position
        self.expected = expected
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)


class UnknownFunctionError(ParseError):
    def __init__(self, name: str, position: int):
        self.name = name
        super().__init__(f"unknown function '{name}'", position)


class UnboundVariableError(ExprError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable '{name}'")


class DomainError(ExprError):
    """A numeric operation left its real domain (ln, sqrt, fractional power)."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]

#: function name -> (min arity, max arity or None for unbounded)
FUNCTIONS: dict[str, tuple[int, int | None]] = {
    "sin": (1, 1),
    "cos": (1, 1),
    "tan": (1, 1),
    "exp": (1, 1),
    "ln": (1, 1),
    "abs": (1, 1),
    "sqrt": (1, 1),
    "arctan": (1, 1),
    "min": (2, None),
    "max": (2, None),
}

CONSTANTS = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | name | op | end
    text: str
    position: int


def _tokenize(source: str) -> Iterator[_Token]:
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(source) - len(stripped)
            raise ParseError(f"unexpected character {stripped[0]!r}", bad_at)
        pos = match.end()
        for kind in ("number", "name", "op"):
            text = match.group(kind)
            if text is not None:
                yield _Token(kind, text, match.start(kind))
                break
    yield _Token("end", "", len(source))


class _Parser:
    """Plain recursive descent over the token stream."""

    def __init__(self, source: str):
        self.source = source
        self.tokens = list(_tokenize(source))
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect_op(self, op: str) -> None:
        token = self.current
        if token.kind != "op" or token.text != op:
            raise ParseError(
                f"unexpected token {token.text!r}" if token.text else "unexpected end of input",
                token.position,
                expected=f"'{op}'",
            )
        self.advance()

    def parse(self) -> Expr:
        node = self.parse_sum()
        token = self.current
        if token.kind != "end":
            raise ParseError(f"unexpected token {token.text!r}", token.position, expected="end of input")
        return node

    def parse_sum(self) -> Expr:
        node = self.parse_product()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.parse_product())
        return node

    def parse_product(self) -> Expr:
        node = self.parse_unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> Expr:
        if self.current.kind == "op" and self.current.text == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.current.kind == "op" and self.current.text == "^":
            self.advance()
            # right associative; the exponent may start with unary minus
            return BinOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self.advance()
            return Num(float(token.text))
        if token.kind == "name":
            self.advance()
            if self.current.kind == "op" and self.current.text == "(":
                return self.parse_call(token)
            if token.text in CONSTANTS:
                return Num(CONSTANTS[token.text])
            return Var(token.text)
        if token.kind == "op" and token.text == "(":
            self.advance()
            node = self.parse_sum()
            self.expect_op(")")
            return node
        raise ParseError(
            f"unexpected token {token.text!r}" if token.text else "unexpected end of input",
            token.position,
            expected="a number, name or '('",
        )

    def parse_call(self, name_token: _Token) -> Expr:
        name = name_token.text
        if name not in FUNCTIONS:
            raise UnknownFunctionError(name, name_token.position)
        self.expect_op("(")
        args = [self.parse_sum()]
        while self.current.kind == "op" and self.current.text == ",":
            self.advance()
            args.append(self.parse_sum())
        self.expect_op(")")
        lo, hi = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            arity = str(lo) if hi == lo else f"{lo}+" if hi is None else f"{lo}..{hi}"
            raise ParseError(
                f"function '{name}' takes {arity} argument(s), got {len(args)}",
                name_token.position,
            )
        return Call(name, tuple(args))


def parse(source: str) -> Expr:
    """Parse ``source`` into an expression tree.

    Raises :class:`ParseError` (with position and expectation) on malformed
    input and :class:`UnknownFunctionError` for a call to an unknown name.
    Unknown plain identifiers are legal here; they surface at evaluation
    time as :class:`UnboundVariableError`.
    """
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Evaluation

Value = Union[float, np.ndarray]


def _check_domain(condition: np.ndarray | bool, message: str) -> None:
    if np.any(condition):
        raise DomainError(message)


def _apply_function(name: str, args: list[Value]) -> Value:
    if name == "ln":
        _check_domain(np.asarray(args[0]) <= 0.0, "ln of a nonpositive value")
        return np.log(args[0])
    if name == "sqrt":
        _check_domain(np.asarray(args[0]) < 0.0, "sqrt of a negative value")
        return np.sqrt(args[0])
    if name == "min":
        out = args[0]
        for arg in args[1:]:
            out = np.minimum(out, arg)
        return out
    if name == "max":
        out = args[0]
        for arg in args[1:]:
            out = np.maximum(out, arg)
        return out
    simple = {
        "sin": np.sin,
        "cos": np.cos,
        "tan": np.tan,
        "exp": np.exp,
        "abs": np.abs,
        "arctan": np.arctan,
    }
    return simple[name](args[0])


def _eval(node: Expr, bindings: Mapping[str, Value]) -> Value:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return bindings[node.name]
        except KeyError:
            raise UnboundVariableError(node.name) from None
    if isinstance(node, Neg):
        return -_eval(node.operand, bindings)  # type: ignore[operator]
    if isinstance(node, Call):
        return _apply_function(node.func, [_eval(a, bindings) for a in node.args])
    left = _eval(node.left, bindings)
    right = _eval(node.right, bindings)
    if node.op == "+":
        return left + right  # type: ignore[operator]
    if node.op == "-":
        return left - right  # type: ignore[operator]
    if node.op == "*":
        return left * right  # type: ignore[operator]
    if node.op == "/":
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.true_divide(left, right)
    # power: negative base is only meaningful for integer exponents
    base = np.asarray(left, dtype=float)
    expo = np.asarray(right, dtype=float)
    _check_domain(
        (base < 0.0) & (expo != np.floor(expo)),
        "negative base raised to a non-integer power",
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.power(base, expo)
    if out.ndim == 0 and np.ndim(left) == 0 and np.ndim(right) == 0:
        return float(out)
    return out


def evaluate(node: Expr, bindings: Mapping[str, Value] | None = None) -> Value:
    """Evaluate ``node`` with the given variable bindings.

    Bindings may mix floats and numpy arrays (broadcast applies).  The result
    is a plain float whenever every binding that was touched is scalar.
    """
    result = _eval(node, bindings or {})
    if isinstance(result, np.ndarray) and result.ndim == 0:
        return float(result)
    if isinstance(result, (np.floating, int)):
        return float(result)
    return result


def variables(node: Expr) -> frozenset[str]:
    """The set of variable names appearing in the tree."""
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        out: frozenset[str] = frozenset()
        for arg in node.args:
            out |= variables(arg)
        return out
    return frozenset()


# ---------------------------------------------------------------------------
# Canonical printing

_PREC_SUM = 1
_PREC_PRODUCT = 2
_PREC_UNARY = 3
_PREC_POWER = 4
_PREC_ATOM = 5


def _precedence(node: Expr) -> int:
    if isinstance(node, BinOp):
        if node.op in "+-":
            return _PREC_SUM
        if node.op in "*/":
            return _PREC_PRODUCT
        return _PREC_POWER
    if isinstance(node, Neg):
        return _PREC_UNARY
    if isinstance(node, Num) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        # a negative literal prints with a leading '-', same binding as unary
        return _PREC_UNARY
    return _PREC_ATOM


def _render(node: Expr, min_prec: int) -> str:
    if isinstance(node, Num):
        text = repr(node.value)
    elif isinstance(node, Var):
        text = node.name
    elif isinstance(node, Neg):
        text = "-" + _render(node.operand, _PREC_UNARY + 1)
    elif isinstance(node, Call):
        text = node.func + "(" + ",".join(_render(a, _PREC_SUM) for a in node.args) + ")"
    else:
        if node.op in "+-":
            text = _render(node.left, _PREC_SUM) + node.op + _render(node.right, _PREC_SUM + 1)
        elif node.op in "*/":
            text = _render(node.left, _PREC_PRODUCT) + node.op + _render(node.right, _PREC_PRODUCT + 1)
        else:
            # right associative: exponent may be unary, base must be atomic
            text = _render(node.left, _PREC_ATOM) + "^" + _render(node.right, _PREC_UNARY)
    if _precedence(node) < min_prec:
        return "(" + text + ")"
    return text


def render(node: Expr) -> str:
    """Print the tree so that ``parse(render(node))`` evaluates identically.

    Numeric literals use ``repr`` which round-trips binary64 exactly.
    """
    return _render(node, _PREC_SUM)
