"""Small expression language for potentials, controls and initial states.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative, binds tighter than unary minus
    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

NAME is one of x1..xd, t, pi or a function from FUNCTIONS.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from .core import ConfigError, SamplingError


class ExprSyntaxError(ConfigError):
    def __init__(self, message, line, col):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, Bin, Call]


def _sech(x):
    return 1.0 / np.cosh(x)


FUNCTIONS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "erfc": special.erfc,
    "sech": _sech,
}
CONSTANTS = {"pi": math.pi}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


def _tokenize(src):
    pos, line, col = 0, 1, 1
    out = []
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", line, col)
        text = m.group()
        if m.lastgroup != "ws":
            out.append((m.lastgroup, text, line, col))
        for ch in text:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        pos = m.end()
    out.append(("end", "", line, col))
    return out


class _Parser:
    def __init__(self, src):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, line, col = self.take()
        if val != text:
            raise ExprSyntaxError(f"expected {text!r}, found {val or 'end of input'!r}", line, col)

    def parse(self):
        e = self.expr()
        kind, val, line, col = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", line, col)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            e = Bin(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            e = Bin(op, e, self.unary())
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        kind, val, line, col = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                if self.peek()[1] == ",":
                    _, _, l2, c2 = self.peek()
                    raise ExprSyntaxError(f"function {val} takes exactly one argument", l2, c2)
                self.expect(")")
                return Call(val, arg)
            if self.peek()[1] == "(":
                raise ExprSyntaxError(f"unknown function {val!r}", line, col)
            if val in CONSTANTS:
                return Num(CONSTANTS[val])
            if val == "t" or re.fullmatch(r"x[1-9]\d*", val):
                return Var(val)
            raise ExprSyntaxError(f"unknown identifier {val!r}", line, col)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", line, col)


def parse(source: str, dimension: int | None = None) -> Expr:
    e = _Parser(source).parse()
    if dimension is not None:
        check_dimension(e, dimension)
    return e


def variables(e: Expr) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


def check_dimension(e: Expr, d: int):
    for v in variables(e):
        if v != "t" and int(v[1:]) > d:
            raise ConfigError(f"variable {v} exceeds dimension {d}")


def pretty(e: Expr) -> str:
    """Fully parenthesised rendering; parse(pretty(e)) == e."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{pretty(e.arg)})"
    if isinstance(e, Call):
        return f"{e.fn}({pretty(e.arg)})"
    return f"({pretty(e.left)} {e.op} {pretty(e.right)})"


_BINOPS = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.true_divide, "^": np.power}


def _eval(e, env):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return np.negative(_eval(e.arg, env))
    if isinstance(e, Call):
        return FUNCTIONS[e.fn](_eval(e.arg, env))
    return _BINOPS[e.op](_eval(e.left, env), _eval(e.right, env))


def _culprit(e, env):
    """Innermost subexpression producing a non-finite value."""
    children = []
    if isinstance(e, (Neg, Call)):
        children = [e.arg]
    elif isinstance(e, Bin):
        children = [e.left, e.right]
    for c in children:
        with np.errstate(all="ignore"):
            v = _eval(c, env)
        if not np.all(np.isfinite(v)):
            return _culprit(c, env)
    return e


def _env(points, t):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    env = {f"x{i + 1}": pts[:, i] for i in range(pts.shape[1])}
    env["t"] = np.float64(t)
    return env, pts.shape[0]


def evaluate_array(e: Expr, points, t: float = 0.0) -> np.ndarray:
    """Vectorised evaluation at points of shape (n, d); returns complex (n,)."""
    env, n = _env(points, t)
    check_dimension(e, len(env) - 1)
    with np.errstate(all="ignore"):
        v = np.broadcast_to(_eval(e, env), (n,))
    bad = ~np.isfinite(v)
    if bad.any():
        k = int(np.argmax(bad))
        sub = _culprit(e, {key: (val[k:k + 1] if np.ndim(val) else val) for key, val in env.items()})
        where = np.atleast_2d(np.asarray(points, dtype=float))[k].tolist()
        raise SamplingError(f"non-finite value of {pretty(sub)} at x={where}, t={t}")
    return v.astype(complex)


def evaluate(e: Expr, point, t: float = 0.0) -> complex:
    return complex(evaluate_array(e, np.atleast_1d(np.asarray(point, dtype=float))[None, :], t)[0])


def to_sampler(e: Expr, t: float = 0.0):
    """Sampler points -> values at fixed time t."""
    return lambda pts: evaluate_array(e, pts, t)


def complex_sampler(re_e: Expr, im_e: Expr | None):
    if im_e is None:
        return lambda pts: evaluate_array(re_e, pts)
    return lambda pts: evaluate_array(re_e, pts) + 1j * evaluate_array(im_e, pts)


def time_function(e: Expr):
    """Scalar function of t only (e.g. a control u)."""
    if variables(e) - {"t"}:
        raise ConfigError(f"control expression may depend on t only: {pretty(e)}")
    return lambda t: evaluate(e, np.zeros(1), t).real
