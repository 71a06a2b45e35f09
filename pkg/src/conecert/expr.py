"""A small expression language for coefficients, nonlinearities and combiners.

Grammar (highest binding first)::

    atom    := number | pi | name | func '(' expr [',' expr] ')' | '(' expr ')'
    power   := atom [('^' | '**') unary]          right associative
    unary   := ('-' | '+') unary | power
    term    := unary (('*' | '/') unary)*
    expr    := term (('+' | '-') term)*

Unary functions: abs sqrt sin cos tan exp log.  Binary functions: max min pow.
Expressions are immutable trees; :func:`evaluate` works on scalars or numpy
arrays (broadcasting), :func:`evaluate_reference` is a plain recursive
evaluator on Python floats used as an independent check.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Union

import numpy as np

from .errors import EvalDomainError, ExprSyntaxError, UnboundName, UnknownIdentifier

UNARY_FUNCS = ("abs", "sqrt", "sin", "cos", "tan", "exp", "log")
BINARY_FUNCS = ("max", "min", "pow")
INFIX_OPS = ("+", "-", "*", "/", "^")
RESERVED = frozenset(UNARY_FUNCS + BINARY_FUNCS + ("pi",))

TAN_POLE_GUARD = 1e-8


@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError("numeric literals are finite and nonnegative")

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Const:
    name: str = "pi"

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of UNARY_FUNCS
    arg: "Expr"

    def __str__(self):
        if self.op == "neg":
            return f"(-{self.arg})"
        return f"{self.op}({self.arg})"


@dataclass(frozen=True)
class Binary:
    op: str  # one of INFIX_OPS, "max", "min"
    left: "Expr"
    right: "Expr"

    def __str__(self):
        if self.op in ("max", "min"):
            return f"{self.op}({self.left}, {self.right})"
        return f"({self.left} {self.op} {self.right})"


Expr = Union[Num, Const, Var, Unary, Binary]


def to_text(e: Expr) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    return str(e)


def signature(n: int, scalars: Iterable[str] = (), space: bool = True) -> frozenset:
    """Names visible to an expression: x1, x2, u1..un and bound scalars."""
    names = {f"u{i}" for i in range(1, n + 1)}
    if space:
        names |= {"x1", "x2"}
    return frozenset(names | set(scalars))


def free_names(e: Expr) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Unary):
        return free_names(e.arg)
    if isinstance(e, Binary):
        return free_names(e.left) | free_names(e.right)
    return set()


# ---------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),])"
    r")"
)


def _tokenize(text):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, names):
        self.tokens = _tokenize(text)
        self.i = 0
        self.names = names

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            what = repr(tok[1]) if tok[0] != "end" else "end of input"
            raise ExprSyntaxError(f"expected {value!r}, found {what}", tok[2])
        return tok

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary(op, e, self.unary())
        return e

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("^", "**"):
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            if value == "pi":
                return Const("pi")
            if value in UNARY_FUNCS or value in BINARY_FUNCS:
                self.expect("(")
                first = self.expr()
                if value in UNARY_FUNCS:
                    self.expect(")")
                    return Unary(value, first)
                self.expect(",")
                second = self.expr()
                self.expect(")")
                return Binary("^" if value == "pow" else value, first, second)
            if value not in self.names:
                raise UnknownIdentifier(f"unknown identifier {value!r} at position {pos}")
            return Var(value)
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected token {value!r}", pos)


def parse(text: str, names: Iterable[str] = ()) -> Expr:
    """Parse ``text`` into an expression tree.

    ``names`` lists the identifiers the expression may reference; anything
    else raises :class:`UnknownIdentifier`.
    """
    names = frozenset(names)
    clash = names & RESERVED
    if clash:
        raise ValueError(f"reserved names cannot be declared: {sorted(clash)}")
    return _Parser(text, names).parse()


def parse_constant(value) -> float:
    """Accept a number or a closed expression such as ``"15/64*pi"``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    return float(evaluate(parse(str(value)), {}))


# ---------------------------------------------------------------- evaluation


def _tan_pole(x):
    k = np.round((x - np.pi / 2) / np.pi)
    return np.abs(x - np.pi / 2 - k * np.pi) < TAN_POLE_GUARD


def _domain_fail(mask, message):
    mask = np.asarray(mask)
    if mask.ndim == 0:
        if bool(mask):
            raise EvalDomainError(message)
        return
    if mask.any():
        idx = int(np.flatnonzero(mask)[0])
        raise EvalDomainError(f"{message} (first at flat index {idx})", index=idx)


def _finite_check(result, op):
    _domain_fail(~np.isfinite(result), f"{op} produced a non-finite value")
    return result


def _eval_unary(op, a):
    if op == "neg":
        return -a
    if op == "abs":
        return np.abs(a)
    if op == "sqrt":
        _domain_fail(a < 0, "sqrt of a negative number")
        return np.sqrt(a)
    if op == "log":
        _domain_fail(a <= 0, "log of a non-positive number")
        return np.log(a)
    if op == "tan":
        _domain_fail(_tan_pole(a), "tan evaluated at a pole")
        return _finite_check(np.tan(a), "tan")
    if op == "exp":
        return _finite_check(np.exp(a), "exp")
    if op == "sin":
        return np.sin(a)
    if op == "cos":
        return np.cos(a)
    raise ValueError(f"unknown unary op {op}")


def _eval_binary(op, a, b):
    if op == "+":
        return _finite_check(a + b, "+")
    if op == "-":
        return _finite_check(a - b, "-")
    if op == "*":
        return _finite_check(a * b, "*")
    if op == "/":
        _domain_fail(b == 0, "division by zero")
        return _finite_check(a / b, "/")
    if op == "^":
        return _finite_check(np.power(a, b), "pow")
    if op == "max":
        return np.maximum(a, b)
    if op == "min":
        return np.minimum(a, b)
    raise ValueError(f"unknown binary op {op}")


def evaluate(e: Expr, env: Mapping[str, object]):
    """Evaluate ``e`` with numpy semantics; arrays in ``env`` broadcast."""
    with np.errstate(all="ignore"):
        return _evaluate(e, env)


def _evaluate(e, env):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Const):
        return np.float64(math.pi)
    if isinstance(e, Var):
        try:
            return np.asarray(env[e.name], dtype=float)
        except KeyError:
            raise UnboundName(f"name {e.name!r} is not bound") from None
    if isinstance(e, Unary):
        return _eval_unary(e.op, _evaluate(e.arg, env))
    if isinstance(e, Binary):
        return _eval_binary(e.op, _evaluate(e.left, env), _evaluate(e.right, env))
    raise TypeError(f"not an expression: {e!r}")


def compile_expr(e: Expr) -> Callable[[Mapping[str, object]], object]:
    """Return ``env -> value``; a convenience wrapper around :func:`evaluate`."""
    return lambda env: evaluate(e, env)


_REF_UNARY = {
    "neg": lambda a: -a,
    "abs": abs,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
}


def evaluate_reference(e: Expr, env: Mapping[str, float]) -> float:
    """Scalar evaluator on Python floats using only the ``math`` module."""
    try:
        return _ref(e, env)
    except (ValueError, OverflowError, ZeroDivisionError) as exc:
        raise EvalDomainError(str(exc)) from None


def _ref(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Const):
        return math.pi
    if isinstance(e, Var):
        if e.name not in env:
            raise UnboundName(f"name {e.name!r} is not bound")
        return float(env[e.name])
    if isinstance(e, Unary):
        a = _ref(e.arg, env)
        if e.op == "sqrt":
            return math.sqrt(a)
        if e.op == "log":
            if a == 0:
                raise ValueError("log of zero")
            return math.log(a)
        if e.op == "tan":
            k = round((a - math.pi / 2) / math.pi)
            if abs(a - math.pi / 2 - k * math.pi) < TAN_POLE_GUARD:
                raise ValueError("tan at a pole")
            return _finite(math.tan(a))
        return _finite(_REF_UNARY[e.op](a))
    a = _ref(e.left, env)
    b = _ref(e.right, env)
    if e.op == "+":
        return _finite(a + b)
    if e.op == "-":
        return _finite(a - b)
    if e.op == "*":
        return _finite(a * b)
    if e.op == "/":
        return _finite(a / b)
    if e.op == "^":
        return _finite(math.pow(a, b))
    if e.op == "max":
        return max(a, b)
    if e.op == "min":
        return min(a, b)
    raise ValueError(f"unknown op {e.op}")


def _finite(v):
    if not math.isfinite(v):
        raise OverflowError("non-finite intermediate value")
    return v
