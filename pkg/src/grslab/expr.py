"""Closed-form coordinate expressions.

Expressions are small immutable trees.  ``parse`` reads infix text with the
usual precedence (``^`` binds tighter than unary minus, which binds tighter
than ``* /``, then ``+ -``), function calls ``exp``, ``ln`` and ``sqrt``, and
decimal or scientific literals.  ``to_string`` prints a tree so that parsing
the printed text gives back the same tree.

Evaluation goes through :mod:`grslab.jets`, so every expression yields exact
partial derivatives through order 3.  Anything that exposes
``jet(points, order)`` can stand in for an :class:`Expr` where a field is
expected (see :class:`Field`).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import jets as J
from .jets import Jet, JetDomainError

BINARY = ("add", "sub", "mul", "div")
UNARY = ("neg", "pow", "exp", "ln", "sqrt")
LEAVES = ("const", "var")
FUNCTIONS = ("exp", "ln", "sqrt")


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ValueError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at byte offset {offset}")
        self.name = name
        self.offset = offset


class DomainError(ArithmeticError):
    """Evaluation hit a singular point of a subexpression."""

    def __init__(self, message: str, subexpr: "Expr"):
        super().__init__(f"{message} in {to_string(subexpr)}")
        self.subexpr = subexpr


@dataclass(frozen=True, eq=True)
class Expr:
    """A node of an expression tree.

    ``value`` holds the float of a constant, ``(name, index)`` of a
    coordinate variable, or the :class:`~fractions.Fraction` exponent of a
    power node.
    """

    kind: str
    children: tuple["Expr", ...] = ()
    value: object = None

    def __post_init__(self):
        n = len(self.children)
        if self.kind in LEAVES:
            ok = n == 0
        elif self.kind in BINARY:
            ok = n == 2
        elif self.kind in UNARY:
            ok = n == 1
        else:
            raise ValueError(f"unknown node kind {self.kind!r}")
        if not ok:
            raise ValueError(f"{self.kind} node with {n} children")
        if self.kind == "pow":
            if not isinstance(self.value, Fraction):
                raise ValueError("power exponent must be a Fraction")

    # convenience constructors and operators for programmatic building

    def __add__(self, other):
        return Expr("add", (self, lift(other)))

    def __radd__(self, other):
        return Expr("add", (lift(other), self))

    def __sub__(self, other):
        return Expr("sub", (self, lift(other)))

    def __rsub__(self, other):
        return Expr("sub", (lift(other), self))

    def __mul__(self, other):
        return Expr("mul", (self, lift(other)))

    def __rmul__(self, other):
        return Expr("mul", (lift(other), self))

    def __truediv__(self, other):
        return Expr("div", (self, lift(other)))

    def __rtruediv__(self, other):
        return Expr("div", (lift(other), self))

    def __neg__(self):
        return Expr("neg", (self,))

    def __pow__(self, p):
        return Expr("pow", (self,), Fraction(p).limit_denominator(10**6) if isinstance(p, float) else Fraction(p))

    def __str__(self) -> str:
        return to_string(self)

    @property
    def is_constant(self) -> bool:
        return self.kind == "const"

    def variables(self) -> set[str]:
        if self.kind == "var":
            return {self.value[0]}
        out: set[str] = set()
        for c in self.children:
            out |= c.variables()
        return out

    def max_index(self) -> int:
        if self.kind == "var":
            return self.value[1]
        return max((c.max_index() for c in self.children), default=-1)

    def jet(self, points, order: int) -> Jet:
        """Batched jets at ``points`` of shape (N, n)."""
        return eval_jet_batch(self, points, order)

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return eval_jet_batch(self, points, 0).value


def const(x: float) -> Expr:
    return Expr("const", (), float(x))


def var(name: str, index: int) -> Expr:
    return Expr("var", (), (name, index))


def lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def exp(e) -> Expr:
    return Expr("exp", (lift(e),))


def ln(e) -> Expr:
    return Expr("ln", (lift(e),))


def sqrt(e) -> Expr:
    return Expr("sqrt", (lift(e),))


# ----------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z_0-9']*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte(text, pos))
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), _byte(text, pos)))
        pos = m.end()
    toks.append(_Tok("end", "", _byte(text, len(text))))
    return toks


def _byte(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, coords: Sequence[str], constants: dict[str, float]):
        self.toks = _tokenize(text)
        self.i = 0
        self.coords = {name: k for k, name in enumerate(coords)}
        self.constants = constants

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind == "end":
            raise ExprSyntaxError(f"expected {text!r}, found {self._found()}", self.tok.offset)
        self.advance()

    def _found(self) -> str:
        return "end of input" if self.tok.kind == "end" else repr(self.tok.text)

    def parse(self) -> Expr:
        e = self.sum()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"expected operator or end of input, found {self._found()}",
                                  self.tok.offset)
        return e

    def sum(self) -> Expr:
        left = self.product()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = "add" if self.advance().text == "+" else "sub"
            left = _fold(op, left, self.product())
        return left

    def product(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = "mul" if self.advance().text == "*" else "div"
            left = _fold(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            inner = self.unary()
            if inner.kind == "const":
                return const(-inner.value)
            return Expr("neg", (inner,))
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            at = self.advance().offset
            expo = self.exponent(at)
            if base.kind == "const":
                return const(_const_pow(base.value, expo, at))
            return Expr("pow", (base,), expo)
        return base

    def exponent(self, at: int) -> Fraction:
        sign = 1
        while self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            sign = -sign
        start = self.tok.offset
        e = self.power()
        if e.kind != "const":
            raise ExprSyntaxError("exponent must be a rational constant", start)
        return sign * _as_fraction(e.value)

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return const(float(t.text))
        if t.kind == "id":
            self.advance()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.sum()
                self.expect(")")
                return Expr(t.text, (arg,))
            if t.text in self.coords:
                return var(t.text, self.coords[t.text])
            if t.text in self.constants:
                return const(self.constants[t.text])
            raise UnknownIdentifierError(t.text, t.offset)
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.sum()
            self.expect(")")
            return e
        raise ExprSyntaxError(f"expected number, identifier or '(', found {self._found()}", t.offset)


def _as_fraction(x: float) -> Fraction:
    f = Fraction(x).limit_denominator(10**6)
    if abs(float(f) - x) > 1e-15 * max(1.0, abs(x)):
        return Fraction(x)
    return f


def _const_pow(base: float, expo: Fraction, at: int) -> float:
    if expo.denominator != 1 and base <= 0:
        raise ExprSyntaxError("non-integer power of a non-positive literal", at)
    if base == 0 and expo < 0:
        raise ExprSyntaxError("negative power of zero", at)
    return float(base ** float(expo)) if expo.denominator != 1 else float(base ** expo.numerator)


def _fold(op: str, a: Expr, b: Expr) -> Expr:
    # literal-literal folding only; no algebraic simplification
    if a.kind == "const" and b.kind == "const":
        x, y = a.value, b.value
        if op == "add":
            return const(x + y)
        if op == "sub":
            return const(x - y)
        if op == "mul":
            return const(x * y)
        if y != 0:
            return const(x / y)
    return Expr(op, (a, b))


def parse(text: str, coords: Sequence[str], constants: dict[str, float] | None = None) -> Expr:
    """Parse ``text`` into an :class:`Expr` over the coordinate names ``coords``.

    ``constants`` substitutes named parameters (e.g. ``{"alpha": 1.0}``) by
    constant leaves.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, list(coords), dict(constants or {})).parse()


# ----------------------------------------------------------------------------
# printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _prec(e: Expr) -> int:
    if e.kind == "const" and (e.value < 0 or str(e.value).startswith("-")):
        return 3
    return _PREC.get(e.kind, 5)


def _fmt_const(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("cannot print a non-finite constant")
    if x == int(x) and abs(x) < 1e16:
        return str(int(x)) if not (x == 0 and math.copysign(1, x) < 0) else "-0"
    return repr(x)


def _fmt_fraction(q: Fraction) -> str:
    if q.denominator == 1:
        s = str(q.numerator)
        return s if q >= 0 else f"({s})"
    return f"({q.numerator}/{q.denominator})"


def to_string(e: Expr) -> str:
    k = e.kind
    if k == "const":
        return _fmt_const(e.value)
    if k == "var":
        return e.value[0]
    if k in FUNCTIONS:
        return f"{k}({to_string(e.children[0])})"
    if k == "neg":
        c = e.children[0]
        s = to_string(c)
        return f"-({s})" if _prec(c) < _PREC["neg"] else f"-{s}"
    if k == "pow":
        c = e.children[0]
        s = to_string(c)
        if _prec(c) <= _PREC["pow"]:
            s = f"({s})"
        return f"{s}^{_fmt_fraction(e.value)}"
    a, b = e.children
    p = _PREC[k]
    sa, sb = to_string(a), to_string(b)
    if _prec(a) < p:
        sa = f"({sa})"
    if _prec(b) <= p:
        sb = f"({sb})"
    return f"{sa} {_SYM[k]} {sb}"


# ----------------------------------------------------------------------------
# evaluation

def eval_jet(e: Expr, point: Sequence[float], order: int) -> Jet:
    """Jet of ``e`` at a single point, through ``order``."""
    if not 0 <= order <= J.MAX_ORDER:
        raise ValueError(f"order must be in 0..{J.MAX_ORDER}, got {order}")
    point = np.asarray(point, dtype=float).reshape(1, -1)
    j = eval_jet_batch(e, point, order)
    return Jet(j.coeffs[:, 0], j.nvars, j.order)


def eval_jet_batch(e: Expr, points: np.ndarray, order: int) -> Jet:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must have shape (N, n)")
    n = points.shape[1]
    if e.max_index() >= n:
        raise ValueError(f"expression uses coordinate index {e.max_index()} but points have dimension {n}")
    memo: dict[int, Jet] = {}
    return _eval(e, points, n, order, memo)


def _eval(e: Expr, pts: np.ndarray, n: int, order: int, memo: dict) -> Jet:
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    k = e.kind
    if k == "const":
        out = Jet.constant(np.full(len(pts), e.value), n, order)
    elif k == "var":
        out = Jet.variable(pts[:, e.value[1]], e.value[1], n, order)
    else:
        args = [_eval(c, pts, n, order, memo) for c in e.children]
        try:
            out = _apply(e, args)
        except JetDomainError as err:
            raise DomainError(str(err), e) from None
        if k == "div" and np.any(np.abs(args[1].value) < 1e-300):
            raise DomainError("division by zero", e)
    memo[key] = (e, out)
    return out


def _apply(e: Expr, args: list[Jet]) -> Jet:
    k = e.kind
    if k == "add":
        return args[0] + args[1]
    if k == "sub":
        return args[0] - args[1]
    if k == "mul":
        return J.jet_mul(args[0], args[1])
    if k == "div":
        return J.jet_div(args[0], args[1])
    if k == "neg":
        return -args[0]
    if k == "exp":
        return J.jet_exp(args[0])
    if k == "ln":
        return J.jet_ln(args[0])
    if k == "sqrt":
        return J.jet_sqrt(args[0])
    if k == "pow":
        return J.jet_powq(args[0], e.value)
    raise AssertionError(k)


# ----------------------------------------------------------------------------
# generic fields

class Field:
    """A scalar field known only through its jets.

    ``fn`` receives the jets of ``deps`` (each an Expr or Field) evaluated at
    the same points and order, and returns the jet of the field.
    """

    def __init__(self, fn: Callable[..., Jet], *deps, label: str = "field", extra_order: int = 0):
        self.fn = fn
        self.deps = deps
        self.label = label
        self.extra_order = extra_order

    def jet(self, points, order: int) -> Jet:
        points = np.asarray(points, dtype=float)
        k = order + self.extra_order
        if k > J.MAX_ORDER + 1:
            raise ValueError(f"{self.label} needs order {k} > {J.MAX_ORDER + 1}")
        args = [field_jet(d, points, k) for d in self.deps]
        out = self.fn(*args)
        return out.truncate(order) if out.order > order else out

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.jet(points, 0).value

    def __repr__(self) -> str:
        return f"Field({self.label})"


def field_jet(f, points, order: int) -> Jet:
    """Jets of an Expr, Field or plain number at ``points``."""
    points = np.asarray(points, dtype=float)
    if isinstance(f, (int, float)):
        return Jet.constant(np.full(len(points), float(f)), points.shape[1], order)
    return f.jet(points, order)


def field_label(f) -> str:
    if isinstance(f, Expr):
        return to_string(f)
    if isinstance(f, (int, float)):
        return repr(float(f))
    return getattr(f, "label", repr(f))
