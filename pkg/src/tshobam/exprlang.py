"""A small arithmetic expression language for time-varying coefficients.

Grammar (``^`` binds tightest and associates to the right; a unary minus
binds looser than ``^`` so ``-2^2 == -4``)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are the free variable (``t`` by default), the constant ``pi`` and the
functions sin, cos, tan, exp, ln, sqrt, abs, arctan.  Evaluation is
vectorised over numpy arrays and raises :class:`DomainError` instead of
producing nan or inf.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifier

__all__ = [
    "Expr", "Num", "Var", "Const", "Neg", "BinOp", "Call",
    "parse", "evaluate", "pretty", "bound_scan", "FUNCTIONS",
]


def _ln(x):
    if np.any(x <= 0):
        raise DomainError("ln of a non-positive number")
    return np.log(x)


def _sqrt(x):
    if np.any(x < 0):
        raise DomainError("sqrt of a negative number")
    return np.sqrt(x)


FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "abs": np.abs,
    "arctan": np.arctan,
}
CONSTANTS = {"pi": math.pi}

# precedence levels used by the printer
_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5
_BIN_PREC = {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "^": _POW}


class Expr:
    """Base class of expression nodes.  Nodes are immutable and hashable."""

    def __call__(self, t):
        return evaluate(self, t)

    def __str__(self):
        return pretty(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Const(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr


# -- lexer ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokens(src):
    pos = 0
    out = []
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {src[pos]!r}", _byte(src, pos))
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


def _byte(src, pos):
    return len(src[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, src, variables):
        self.src = src
        self.toks = _tokens(src)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None, cls=ParseError):
        tok = tok or self.peek()
        raise cls(msg, _byte(self.src, tok[2]))

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] != "op":
            self.fail(f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        return self.take()

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return e

    def expr(self):
        left = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                if self.peek()[1] != "(":
                    self.fail(f"function {text!r} needs parentheses")
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                self.fail(f"unknown function {text!r}", tok, UnknownIdentifier)
            if text in CONSTANTS:
                return Const(text)
            if text in self.variables:
                return Var(text)
            self.fail(f"unknown identifier {text!r}", tok, UnknownIdentifier)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        self.fail(f"unexpected {text or 'end of input'!r}", tok)


def parse(src: str, variables=("t",)) -> Expr:
    """Parse ``src`` into an expression tree."""
    if not isinstance(src, str):
        raise TypeError("expression source must be a string")
    if not src.strip():
        raise ParseError("empty expression", 0)
    return _Parser(src, frozenset(variables)).parse()


# -- evaluation ---------------------------------------------------------------

def _pow(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if np.any((a == 0) & (b < 0)):
        raise DomainError("zero raised to a negative power")
    if np.any((a < 0) & (b != np.round(b))):
        raise DomainError("negative base raised to a non-integer power")
    with np.errstate(over="ignore"):
        return np.power(a, b)


def _eval(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Call):
        with np.errstate(over="ignore", invalid="ignore"):
            return FUNCTIONS[e.fn](np.asarray(_eval(e.arg, env), dtype=float))
    if isinstance(e, BinOp):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        if e.op == "+":
            return np.add(a, b)
        if e.op == "-":
            return np.subtract(a, b)
        if e.op == "*":
            return np.multiply(a, b)
        if e.op == "/":
            if np.any(np.asarray(b) == 0):
                raise DomainError("division by zero")
            return np.divide(a, b)
        return _pow(a, b)
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, t=None, **env):
    """Evaluate ``e`` at ``t`` (scalar or array).  Extra variables go in ``env``."""
    if t is not None:
        env.setdefault("t", t)
    env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    out = np.asarray(_eval(e, env), dtype=float)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"non-finite value from {pretty(e)}")
    shape = np.broadcast_shapes(*(v.shape for v in env.values())) if env else ()
    if out.shape != shape:
        out = np.broadcast_to(out, shape).copy()
    return float(out) if out.ndim == 0 else out


# -- printing -----------------------------------------------------------------

def _fmt(x):
    if math.isfinite(x) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _prec(e):
    if isinstance(e, BinOp):
        return _BIN_PREC[e.op]
    if isinstance(e, Neg) or (isinstance(e, Num) and e.value < 0):
        return _NEG
    return _ATOM


def _wrap(e, need):
    s = pretty(e)
    return f"({s})" if need else s


def pretty(e: Expr) -> str:
    """Render with the fewest parentheses that preserve the tree."""
    if isinstance(e, Num):
        return _fmt(e.value)
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({pretty(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _prec(e.arg) < _NEG)
    p = _BIN_PREC[e.op]
    if e.op == "^":
        left = _wrap(e.left, _prec(e.left) <= _POW)
        right = _wrap(e.right, _prec(e.right) < _NEG)
        return f"{left}^{right}"
    left = _wrap(e.left, _prec(e.left) < p)
    right = _wrap(e.right, _prec(e.right) <= p)
    return f"{left}{e.op}{right}" if p == _MUL else f"{left} {e.op} {right}"


# -- bounds -------------------------------------------------------------------

def bound_scan(e: Expr, ts, window=(0.0, 1000.0), density=None):
    """(min, max) of |e| sampled over the time-scale grid of ``window``."""
    if density is not None:
        ts = ts.with_resolution(density)
    t, _ = ts.grid_arrays(*window)
    v = np.abs(np.asarray(evaluate(e, t), dtype=float))
    return float(v.min()), float(v.max())
