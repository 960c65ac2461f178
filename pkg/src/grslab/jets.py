"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients of a function of ``nvars``
variables through total degree ``order`` (at most 3).  The coefficient of
the multi-index ``alpha`` is ``d^alpha f / alpha!``.  Coefficients live on
the leading axis of ``Jet.coeffs``; any trailing axes are batch or tensor
axes and broadcast like ordinary numpy arrays.

Multi-indices are enumerated in graded lexicographic order: by total
degree first, then lexicographically with larger leading exponents first.
For two variables and order 2 that is::

    (0,0) (1,0) (0,1) (2,0) (1,1) (0,2)

Because the ordering is graded, truncating a jet to a lower order keeps a
prefix of the coefficient table.
"""
from __future__ import annotations

import functools
import itertools
import math
from typing import Sequence

import numpy as np

MAX_ORDER = 3
MAX_VARS = 4
# one order of headroom for fields defined through a derivative of another field
_TABLE_ORDER = MAX_ORDER + 1


class JetShapeError(ValueError):
    """Operands disagree on the number of variables or truncation order."""


class JetDomainError(ArithmeticError):
    """A univariate function was applied outside its domain."""


@functools.lru_cache(maxsize=None)
def multi_indices(nvars: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of total degree <= order, graded lexicographic."""
    if not 1 <= nvars <= MAX_VARS:
        raise JetShapeError(f"nvars must be in 1..{MAX_VARS}, got {nvars}")
    if not 0 <= order <= _TABLE_ORDER:
        raise JetShapeError(f"order must be in 0..{_TABLE_ORDER}, got {order}")
    out = []
    for deg in range(order + 1):
        level = [a for a in itertools.product(range(deg + 1), repeat=nvars) if sum(a) == deg]
        level.sort(reverse=True)
        out.extend(level)
    return tuple(out)


def ncoeffs(nvars: int, order: int) -> int:
    return math.comb(nvars + order, order)


@functools.lru_cache(maxsize=None)
def _position(nvars: int, order: int) -> dict[tuple[int, ...], int]:
    return {a: i for i, a in enumerate(multi_indices(nvars, order))}


@functools.lru_cache(maxsize=None)
def _product_table(nvars: int, order: int):
    # pairs (i, j) with alpha_i + alpha_j = gamma, grouped by gamma in table order
    idx = multi_indices(nvars, order)
    pos = _position(nvars, order)
    rows = []
    for g, gamma in enumerate(idx):
        for i, a in enumerate(idx):
            b = tuple(x - y for x, y in zip(gamma, a))
            if min(b) >= 0:
                rows.append((g, i, pos[b]))
    rows.sort()
    gi = np.array([r[0] for r in rows])
    ai = np.array([r[1] for r in rows])
    bi = np.array([r[2] for r in rows])
    starts = np.searchsorted(gi, np.arange(len(idx)))
    return ai, bi, starts


@functools.lru_cache(maxsize=None)
def _derivative_table(nvars: int, order: int, var: int):
    # coefficient alpha of d/dx_var (order-1 jet) = (alpha_var + 1) * c[alpha + e_var]
    src = []
    fac = []
    pos = _position(nvars, order)
    for a in multi_indices(nvars, order - 1):
        b = list(a)
        b[var] += 1
        src.append(pos[tuple(b)])
        fac.append(a[var] + 1)
    return np.array(src), np.array(fac, dtype=float)


@functools.lru_cache(maxsize=None)
def _factorials(nvars: int, order: int) -> np.ndarray:
    return np.array([math.prod(math.factorial(x) for x in a) for a in multi_indices(nvars, order)],
                    dtype=float)


class Jet:
    """Value and partial derivatives through ``order`` of a scalar field.

    ``coeffs`` has shape ``(ncoeffs(nvars, order), *shape)``.
    """

    __slots__ = ("coeffs", "nvars", "order")
    __array_priority__ = 1000

    def __init__(self, coeffs, nvars: int, order: int):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != ncoeffs(nvars, order):
            raise JetShapeError(
                f"expected {ncoeffs(nvars, order)} coefficients for nvars={nvars}, "
                f"order={order}, got {coeffs.shape[0]}")
        self.coeffs = coeffs
        self.nvars = nvars
        self.order = order

    # construction

    @classmethod
    def constant(cls, value, nvars: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros((ncoeffs(nvars, order),) + value.shape)
        c[0] = value
        return cls(c, nvars, order)

    @classmethod
    def variable(cls, value, var: int, nvars: int, order: int) -> "Jet":
        """Seed jet of the coordinate function ``x_var`` at ``value``."""
        value = np.asarray(value, dtype=float)
        c = np.zeros((ncoeffs(nvars, order),) + value.shape)
        c[0] = value
        if order >= 1:
            c[1 + var] = 1.0
        return cls(c, nvars, order)

    @classmethod
    def from_derivatives(cls, derivs: dict[tuple[int, ...], float], nvars: int, order: int) -> "Jet":
        """Build a jet from a map multi-index -> partial derivative."""
        c = np.zeros(ncoeffs(nvars, order))
        pos = _position(nvars, order)
        fact = _factorials(nvars, order)
        for alpha, d in derivs.items():
            i = pos[tuple(alpha)]
            c[i] = d / fact[i]
        return cls(c, nvars, order)

    # inspection

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    def coefficient(self, alpha: Sequence[int]) -> np.ndarray:
        return self.coeffs[_position(self.nvars, self.order)[tuple(alpha)]]

    def partial(self, alpha: Sequence[int]) -> np.ndarray:
        """The partial derivative d^alpha (not divided by alpha!)."""
        i = _position(self.nvars, self.order)[tuple(alpha)]
        return self.coeffs[i] * _factorials(self.nvars, self.order)[i]

    def gradient(self) -> np.ndarray:
        """First partials, stacked on a new trailing axis."""
        if self.order < 1:
            raise JetShapeError("order-0 jet has no derivatives")
        return np.moveaxis(self.coeffs[1:1 + self.nvars], 0, -1)

    def hessian(self) -> np.ndarray:
        """Second partials as a symmetric matrix on two trailing axes."""
        if self.order < 2:
            raise JetShapeError("need order >= 2 for a Hessian")
        n = self.nvars
        out = np.empty(self.shape + (n, n))
        for a in range(n):
            for b in range(n):
                alpha = [0] * n
                alpha[a] += 1
                alpha[b] += 1
                out[..., a, b] = self.partial(alpha)
        return out

    def __repr__(self) -> str:
        return f"Jet(nvars={self.nvars}, order={self.order}, shape={self.shape})"

    # structural operations

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetShapeError(f"cannot raise order {self.order} to {order}")
        return Jet(self.coeffs[:ncoeffs(self.nvars, order)], self.nvars, order)

    def derivative(self, var: int) -> "Jet":
        """Jet of d/dx_var, one order lower."""
        if self.order < 1:
            raise JetShapeError("cannot differentiate an order-0 jet")
        src, fac = _derivative_table(self.nvars, self.order, var)
        fac = fac.reshape((-1,) + (1,) * (self.coeffs.ndim - 1))
        return Jet(self.coeffs[src] * fac, self.nvars, self.order - 1)

    def grad(self) -> "Jet":
        """Jet of the gradient: derivative index appended as the last axis."""
        parts = [self.derivative(v).coeffs for v in range(self.nvars)]
        return Jet(np.stack(parts, axis=-1), self.nvars, self.order - 1)

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.coeffs[(slice(None),) + key], self.nvars, self.order)

    def transpose(self, *axes: int) -> "Jet":
        return Jet(np.transpose(self.coeffs, (0,) + tuple(a + 1 for a in axes)), self.nvars, self.order)

    def sum(self, axis) -> "Jet":
        if isinstance(axis, int):
            axis = (axis,)
        axis = tuple(a + 1 if a >= 0 else a for a in axis)
        return Jet(self.coeffs.sum(axis=axis), self.nvars, self.order)

    # arithmetic

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.nvars != self.nvars or other.order != self.order:
                raise JetShapeError(
                    f"shape mismatch: ({self.nvars},{self.order}) vs ({other.nvars},{other.order})")
            return other
        value = np.broadcast_to(np.asarray(other, dtype=float), self.shape)
        return Jet.constant(value, self.nvars, self.order)

    def __add__(self, other) -> "Jet":
        other = self._coerce(other)
        return Jet(self.coeffs + other.coeffs, self.nvars, self.order)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        other = self._coerce(other)
        return Jet(self.coeffs - other.coeffs, self.nvars, self.order)

    def __rsub__(self, other) -> "Jet":
        return self._coerce(other) - self

    def __neg__(self) -> "Jet":
        return Jet(-self.coeffs, self.nvars, self.order)

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.coeffs * other, self.nvars, self.order)
        return jet_mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            if np.any(np.abs(other) < 1e-300):
                raise JetDomainError("division by zero")
            return Jet(self.coeffs / other, self.nvars, self.order)
        return jet_div(self, other)

    def __rtruediv__(self, other) -> "Jet":
        return jet_div(self._coerce(other), self)

    def __pow__(self, p) -> "Jet":
        return jet_powq(self, p)


def _check_pair(a: Jet, b: Jet) -> None:
    if a.nvars != b.nvars or a.order != b.order:
        raise JetShapeError(f"shape mismatch: ({a.nvars},{a.order}) vs ({b.nvars},{b.order})")


def jet_add(a: Jet, b: Jet) -> Jet:
    _check_pair(a, b)
    return a + b


def jet_sub(a: Jet, b: Jet) -> Jet:
    _check_pair(a, b)
    return a - b


def jet_neg(a: Jet) -> Jet:
    return -a


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Truncated Cauchy product."""
    _check_pair(a, b)
    if a.order == 0:
        return Jet(a.coeffs * b.coeffs, a.nvars, 0)
    ai, bi, starts = _product_table(a.nvars, a.order)
    prod = a.coeffs[ai] * b.coeffs[bi]
    return Jet(np.add.reduceat(prod, starts, axis=0), a.nvars, a.order)


def jet_einsum(subscripts: str, a: Jet, b: Jet) -> Jet:
    """``np.einsum`` over the tensor axes of two jets, Cauchy product over coefficients.

    Subscripts name only the trailing tensor axes; any batch axes between the
    coefficient axis and the tensor axes are carried along by an ellipsis.
    """
    _check_pair(a, b)
    lhs, out = subscripts.replace(" ", "").split("->")
    s1, s2 = lhs.split(",")
    spec = f"p...{s1},p...{s2}->p...{out}"
    if a.order == 0:
        return Jet(np.einsum(spec, a.coeffs, b.coeffs), a.nvars, 0)
    ai, bi, starts = _product_table(a.nvars, a.order)
    prod = np.einsum(spec, a.coeffs[ai], b.coeffs[bi])
    return Jet(np.add.reduceat(prod, starts, axis=0), a.nvars, a.order)


def compose(a: Jet, derivs: Sequence[np.ndarray]) -> Jet:
    """Apply a univariate function given its derivatives at ``a.value``.

    ``derivs[m]`` is the m-th derivative of the function at the leading value;
    the result is sum_m derivs[m]/m! * (a - a.value)**m, truncated.
    """
    nil = Jet(a.coeffs.copy(), a.nvars, a.order)
    nil.coeffs[0] = 0.0
    out = Jet.constant(derivs[0], a.nvars, a.order)
    power = None
    for m in range(1, a.order + 1):
        power = nil if power is None else jet_mul(power, nil)
        out = out + power * (np.asarray(derivs[m]) / math.factorial(m))
    return out


def jet_exp(a: Jet) -> Jet:
    e = np.exp(a.value)
    return compose(a, [e] * (a.order + 1))


def jet_ln(a: Jet) -> Jet:
    v = a.value
    if np.any(v <= 0):
        raise JetDomainError("ln of a non-positive value")
    derivs = [np.log(v)]
    for m in range(1, a.order + 1):
        derivs.append((-1) ** (m - 1) * math.factorial(m - 1) / v ** m)
    return compose(a, derivs)


def jet_powq(a: Jet, p) -> Jet:
    """``a ** p`` for a rational (or float) exponent ``p``.

    Integer exponents accept any base (negative ones need a nonzero base);
    non-integer exponents need a positive base.
    """
    pf = float(p)
    v = a.value
    is_int = pf == round(pf)
    if not is_int and np.any(v <= 0):
        raise JetDomainError("non-integer power of a non-positive value")
    if is_int and pf < 0 and np.any(np.abs(v) < 1e-300):
        raise JetDomainError("negative power of zero")
    if is_int and pf >= 0:
        n = int(round(pf))
        derivs = []
        for m in range(a.order + 1):
            if m > n:
                derivs.append(np.zeros_like(v))
            else:
                derivs.append(math.perm(n, m) * v ** (n - m))
        return compose(a, derivs)
    derivs = []
    falling = 1.0
    for m in range(a.order + 1):
        derivs.append(falling * v ** (pf - m))
        falling *= pf - m
    return compose(a, derivs)


def jet_sqrt(a: Jet) -> Jet:
    if np.any(a.value <= 0):
        raise JetDomainError("sqrt of a non-positive value")
    return jet_powq(a, 0.5)


def jet_div(a: Jet, b: Jet) -> Jet:
    _check_pair(a, b)
    if np.any(np.abs(b.value) < 1e-300):
        raise JetDomainError("division by zero")
    return jet_mul(a, jet_powq(b, -1))


def stack(jets: Sequence[Jet], axis: int = -1) -> Jet:
    """Stack jets of equal shape along a new tensor axis."""
    first = jets[0]
    for j in jets[1:]:
        _check_pair(first, j)
    if axis < 0:
        axis = first.coeffs.ndim + 1 + axis
    else:
        axis += 1
    return Jet(np.stack([j.coeffs for j in jets], axis=axis), first.nvars, first.order)


def matrix_inverse(g: Jet) -> Jet:
    """Jet of the inverse of a matrix-valued jet (matrix on the last two axes)."""
    g0inv = np.linalg.inv(g.value)
    ginv0 = Jet.constant(g0inv, g.nvars, g.order)
    nil = Jet(g.coeffs.copy(), g.nvars, g.order)
    nil.coeffs[0] = 0.0
    # (g0 + N)^-1 = sum_m (-g0^-1 N)^m g0^-1; N is nilpotent of index order+1
    step = -jet_einsum("ij,jk->ik", ginv0, nil)
    out = ginv0
    term = ginv0
    for _ in range(g.order):
        term = jet_einsum("ij,jk->ik", step, term)
        out = out + term
    return out
