"""Pointwise curvature of a metric on a coordinate chart.

Sign conventions
----------------
The curvature operator follows the affine convention

    R(X, Y)Z = D_[X,Y] Z - D_X D_Y Z + D_Y D_X Z,

applied to the Levi-Civita connection, with R(x, y, z, v) = g(R(x, y)z, v).
The Ricci tensor is the trace rho(x, y) = tr{z -> R(x, z)y}.  With this trace
slot the Ricci tensor of a deformed Riemannian extension is exactly twice the
symmetrised Ricci tensor of the base connection, and the round sphere has
positive Ricci curvature.  Neither choice is stated for the Levi-Civita case
in the source material; the calibration is checked by the test suite.

Index layout
------------
``riemann_op[..., i, j, k, l]`` is the l-th component of R(d_i, d_j)d_k;
``riemann[..., i, j, k, m]`` is R(d_i, d_j, d_k, d_m).  Christoffel symbols
are ``gamma[..., k, i, j]`` = Gamma^k_ij.  A leading axis of length N
enumerates sample points.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import jets as J
from .expr import Expr, field_jet, field_label, parse
from .jets import Jet, jet_einsum


class SingularMetricError(ArithmeticError):
    pass


class DimensionError(ValueError):
    pass


SIGNATURES = ("riemannian", "lorentzian", "neutral", "other")


@dataclass(frozen=True)
class TensorValue:
    """A tensor at one or more points.

    ``variance`` has one entry per slot, ``"contra"`` or ``"co"``; the last
    ``len(variance)`` axes of ``array`` have extent ``dim``.
    """

    dim: int
    variance: tuple[str, ...]
    array: np.ndarray

    def __post_init__(self):
        nslots = len(self.variance)
        if nslots and self.array.shape[-nslots:] != (self.dim,) * nslots:
            raise ValueError(f"array shape {self.array.shape} does not fit {nslots} slots of extent {self.dim}")

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.array))) if self.array.size else 0.0


class MetricField:
    """Symmetric grid of component fields over named coordinates.

    ``components`` is a full d x d grid; entries may be :class:`Expr`, any
    object with ``jet(points, order)``, numbers, or strings (parsed over
    ``coords``).  The grid must be symmetric entry by entry.
    """

    def __init__(self, coords: Sequence[str], components, signature: str = "other",
                 constants: dict[str, float] | None = None):
        self.coords = tuple(coords)
        d = len(self.coords)
        if d not in (2, 3, 4):
            raise DimensionError(f"metric dimension must be 2, 3 or 4, got {d}")
        if signature not in SIGNATURES:
            raise ValueError(f"unknown signature label {signature!r}")
        grid = [[self._coerce(c, constants) for c in row] for row in components]
        if len(grid) != d or any(len(row) != d for row in grid):
            raise DimensionError(f"component grid must be {d}x{d}")
        for i in range(d):
            for j in range(i):
                a, b = grid[i][j], grid[j][i]
                if not (a is b or a == b):
                    raise ValueError(f"components ({i},{j}) and ({j},{i}) differ")
        self._lower = {(i, j): grid[i][j] for i in range(d) for j in range(i + 1)}
        self.dim = d
        self.signature = signature

    def _coerce(self, c, constants):
        if isinstance(c, str):
            return parse(c, self.coords, constants)
        if isinstance(c, (int, float)):
            return float(c)
        return c

    def component(self, i: int, j: int):
        return self._lower[(max(i, j), min(i, j))]

    def __repr__(self) -> str:
        rows = [[field_label(self.component(i, j)) for j in range(self.dim)] for i in range(self.dim)]
        return f"MetricField({self.coords}, {rows})"

    def jet(self, points, order: int) -> Jet:
        """Jet of the component matrix, coefficients shaped (nc, N, d, d)."""
        points = np.asarray(points, dtype=float)
        d = self.dim
        cache: dict[int, Jet] = {}
        cols = {}
        for (i, j), c in self._lower.items():
            key = id(c)
            if key not in cache:
                cache[key] = field_jet(c, points, order)
            cols[(i, j)] = cache[key]
        first = next(iter(cols.values()))
        out = np.empty(first.coeffs.shape + (d, d))
        for (i, j), jt in cols.items():
            out[..., i, j] = jt.coeffs
            out[..., j, i] = jt.coeffs
        return Jet(out, first.nvars, order)


def _as_points(p, d: int) -> tuple[np.ndarray, bool]:
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[1] != d:
        raise DimensionError(f"point dimension {p.shape[1]} does not match chart dimension {d}")
    return p, single


def _perm(j: Jet, spec: str) -> Jet:
    src, dst = spec.split("->")
    return Jet(np.einsum(f"...{src}->...{dst}", j.coeffs), j.nvars, j.order)


class CurvatureStack:
    """Lazily computed curvature quantities of a metric at a batch of points.

    ``order`` is the jet order of the metric components: 2 gives curvature
    values, 3 additionally gives first derivatives of curvature (Cotton
    tensor, covariant derivative of Ricci, divergence of Weyl).
    """

    def __init__(self, metric: MetricField | Jet, points=None, order: int = 2):
        if isinstance(metric, Jet):
            self.metric = None
            self.g_jet = metric
            self.points = None if points is None else np.atleast_2d(np.asarray(points, dtype=float))
        else:
            self.metric = metric
            self.points, _ = _as_points(points, metric.dim)
            self.g_jet = metric.jet(self.points, order)
        self.order = self.g_jet.order
        self.dim = self.g_jet.shape[-1]
        self._check_regular()

    def _check_regular(self) -> None:
        g = self.g_jet.value
        d = self.dim
        det = np.linalg.det(g)
        scale = np.max(np.abs(g), axis=(-2, -1)) ** d
        bad = np.abs(det) < 1e-12 * scale
        if np.any(bad) or not np.all(np.isfinite(g)):
            idx = int(np.argmax(bad)) if np.any(bad) else 0
            raise SingularMetricError(f"metric is singular or non-finite at sample {idx}")

    def _need(self, k: int, what: str) -> None:
        if self.order < k:
            raise ValueError(f"{what} needs metric jets of order {k}, stack has {self.order}")

    # metric

    @property
    def g(self) -> np.ndarray:
        return self.g_jet.value

    @cached_property
    def ginv_jet(self) -> Jet:
        return J.matrix_inverse(self.g_jet)

    @property
    def ginv(self) -> np.ndarray:
        return self.ginv_jet.value

    # connection

    @cached_property
    def gamma_first_jet(self) -> Jet:
        """Gamma_{l i j} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij), index order (l, i, j)."""
        self._need(1, "Christoffel symbols")
        dg = self.g_jet.grad()  # [..., a, b, m] = d_m g_ab
        t1 = _perm(dg, "jli->lij")
        t2 = _perm(dg, "ilj->lij")
        t3 = _perm(dg, "ijl->lij")
        return (t1 + t2 - t3) * 0.5

    @cached_property
    def gamma_jet(self) -> Jet:
        ginv = self.ginv_jet.truncate(self.order - 1)
        return jet_einsum("kl,lij->kij", ginv, self.gamma_first_jet)

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_jet.value

    @property
    def dgamma(self) -> np.ndarray:
        """d_m Gamma^k_ij as ``[..., k, i, j, m]``."""
        self._need(2, "Christoffel derivatives")
        return self.gamma_jet.gradient()

    # curvature

    @cached_property
    def riemann_op_jet(self) -> Jet:
        self._need(2, "curvature")
        G = self.gamma_jet
        dG = G.grad()
        G = G.truncate(self.order - 2)
        std = (_perm(dG, "ljki->ijkl") - _perm(dG, "likj->ijkl")
               + jet_einsum("mjk,lim->ijkl", G, G) - jet_einsum("mik,ljm->ijkl", G, G))
        return -std

    @property
    def riemann_op(self) -> np.ndarray:
        return self.riemann_op_jet.value

    @cached_property
    def riemann_jet(self) -> Jet:
        g = self.g_jet.truncate(self.order - 2)
        return jet_einsum("ijkl,lm->ijkm", self.riemann_op_jet, g)

    @property
    def riemann(self) -> np.ndarray:
        return self.riemann_jet.value

    @cached_property
    def ricci_jet(self) -> Jet:
        return _perm(self.riemann_op_jet, "ijkj->ik")

    @property
    def ricci(self) -> np.ndarray:
        return self.ricci_jet.value

    @cached_property
    def ricci_op_jet(self) -> Jet:
        """Matrix of the Ricci operator: Ric(d_i) = ricci_op[a, i] d_a."""
        ginv = self.ginv_jet.truncate(self.order - 2)
        return jet_einsum("ab,ib->ai", ginv, self.ricci_jet)

    @property
    def ricci_op(self) -> np.ndarray:
        return self.ricci_op_jet.value

    @cached_property
    def scalar_jet(self) -> Jet:
        return _perm(self.ricci_op_jet, "aa->")

    @property
    def scalar(self) -> np.ndarray:
        return self.scalar_jet.value

    @cached_property
    def weyl_jet(self) -> Jet:
        if self.dim != 4:
            raise DimensionError("the Weyl tensor is only provided in dimension 4")
        k = self.order - 2
        g = self.g_jet.truncate(k)
        rho = self.ricci_jet
        tau = self.scalar_jet

        def outer(a: Jet, b: Jet, spec: str) -> Jet:
            return jet_einsum(spec, a, b)

        gg = outer(g, g, "xz,yv->xyzv") - outer(g, g, "yz,xv->xyzv")
        rg = (outer(rho, g, "xz,yv->xyzv") - outer(rho, g, "yz,xv->xyzv")
              + outer(rho, g, "yv,xz->xyzv") - outer(rho, g, "xv,yz->xyzv"))
        tau_b = Jet(tau.coeffs[..., None, None, None, None], tau.nvars, tau.order)
        return self.riemann_jet + J.jet_mul(tau_b, gg) * (1.0 / 6.0) - rg * 0.5

    @property
    def weyl(self) -> np.ndarray:
        return self.weyl_jet.value

    # derivatives of curvature

    @cached_property
    def nabla_ricci(self) -> np.ndarray:
        """(nabla_i rho)(d_j, d_k) as ``[..., i, j, k]``."""
        self._need(3, "the covariant derivative of Ricci")
        rho = self.ricci_jet
        drho = rho.grad().value  # [..., j, k, i]
        G = self.gamma
        r = rho.value
        return (np.einsum("...jki->...ijk", drho)
                - np.einsum("...mij,...mk->...ijk", G, r)
                - np.einsum("...mik,...jm->...ijk", G, r))

    @property
    def dscalar(self) -> np.ndarray:
        self._need(3, "the scalar curvature gradient")
        return self.scalar_jet.gradient()

    @cached_property
    def cotton(self) -> np.ndarray:
        """C(x,y,z) = (nabla_x rho)(y,z) - (nabla_y rho)(x,z) - 1/6 (x(tau) g(y,z) - y(tau) g(x,z))."""
        nr = self.nabla_ricci
        dt = self.dscalar
        g = self.g
        return (nr - np.einsum("...jik->...ijk", nr)
                - (np.einsum("...i,...jk->...ijk", dt, g) - np.einsum("...j,...ik->...ijk", dt, g)) / 6.0)

    @cached_property
    def nabla_riemann(self) -> np.ndarray:
        """(nabla_a R)(x,y,z,v) as ``[..., a, x, y, z, v]``."""
        self._need(3, "the covariant derivative of curvature")
        return _nabla4(self.riemann_jet, self.gamma)

    @cached_property
    def nabla_weyl(self) -> np.ndarray:
        self._need(3, "the covariant derivative of Weyl")
        return _nabla4(self.weyl_jet, self.gamma)

    @cached_property
    def div_weyl(self) -> np.ndarray:
        """(div W)(x,y,z) = sum_a (nabla_{e_a} W)(x,y,z,e^a), contraction on the last slot."""
        return np.einsum("...av,...axyzv->...xyz", self.ginv, self.nabla_weyl)

    @cached_property
    def div_ricci(self) -> np.ndarray:
        return np.einsum("...ij,...ijk->...k", self.ginv, self.nabla_ricci)

    # functions

    def _points_for(self, f) -> np.ndarray:
        if self.points is None:
            raise ValueError("stack built from raw jets has no points to evaluate functions at")
        return self.points

    def function_jet(self, f, order: int = 2) -> Jet:
        return field_jet(f, self._points_for(f), order)

    def gradient_form(self, f) -> np.ndarray:
        return self.function_jet(f, 1).gradient()

    def gradient(self, f) -> np.ndarray:
        return np.einsum("...ab,...b->...a", self.ginv, self.gradient_form(f))

    def gradnorm2(self, f) -> np.ndarray:
        df = self.gradient_form(f)
        return np.einsum("...ab,...a,...b->...", self.ginv, df, df)

    def hessian(self, f) -> np.ndarray:
        """Hes_f(d_i, d_j) = d_i d_j f - Gamma^k_ij d_k f."""
        fj = self.function_jet(f, 2)
        return fj.hessian() - np.einsum("...kij,...k->...ij", self.gamma, fj.gradient())


def _nabla4(T: Jet, G: np.ndarray) -> np.ndarray:
    dT = np.einsum("...xyzva->...axyzv", T.grad().value)
    W = T.value
    return (dT
            - np.einsum("...max,...myzv->...axyzv", G, W)
            - np.einsum("...may,...xmzv->...axyzv", G, W)
            - np.einsum("...maz,...xymv->...axyzv", G, W)
            - np.einsum("...mav,...xyzm->...axyzv", G, W))


# ----------------------------------------------------------------------------
# pointwise API

def _stack(g: MetricField, p, order: int) -> tuple[CurvatureStack, bool]:
    pts, single = _as_points(p, g.dim)
    return CurvatureStack(g, pts, order), single


def _out(a: np.ndarray, single: bool) -> np.ndarray:
    return a[0] if single else a


def metric_at(g: MetricField, p, order: int = 3):
    """Component matrix, its inverse, and the component jets through ``order``."""
    s, single = _stack(g, p, order)
    resid = np.max(np.abs(np.einsum("...ij,...jk->...ik", s.g, s.ginv) - np.eye(g.dim)))
    if resid >= 1e-12 * max(1.0, float(np.max(np.abs(s.g)) * np.max(np.abs(s.ginv)))):
        raise SingularMetricError(f"inverse residual {resid:.3e} too large")
    jet = s.g_jet if not single else Jet(s.g_jet.coeffs[:, 0], s.g_jet.nvars, s.g_jet.order)
    return _out(s.g, single), _out(s.ginv, single), jet


def christoffel(g: MetricField, p) -> tuple[TensorValue, np.ndarray]:
    s, single = _stack(g, p, 2)
    return (TensorValue(g.dim, ("contra", "co", "co"), _out(s.gamma, single)),
            _out(s.dgamma, single))


def riemann(g: MetricField, p) -> tuple[TensorValue, np.ndarray]:
    """R(x,y,z,v) and the operator components R(d_i,d_j)d_k."""
    s, single = _stack(g, p, 2)
    return (TensorValue(g.dim, ("co",) * 4, _out(s.riemann, single)),
            _out(s.riemann_op, single))


def ricci(g: MetricField, p) -> TensorValue:
    s, single = _stack(g, p, 2)
    return TensorValue(g.dim, ("co", "co"), _out(s.ricci, single))


def ricci_operator(g: MetricField, p) -> TensorValue:
    s, single = _stack(g, p, 2)
    return TensorValue(g.dim, ("contra", "co"), _out(s.ricci_op, single))


def scalar(g: MetricField, p):
    s, single = _stack(g, p, 2)
    return _out(s.scalar, single)


def hessian(g: MetricField, f, p) -> TensorValue:
    s, single = _stack(g, p, 1)
    return TensorValue(g.dim, ("co", "co"), _out(s.hessian(f), single))


def gradient(g: MetricField, f, p) -> np.ndarray:
    s, single = _stack(g, p, 0)
    return _out(s.gradient(f), single)


def gradnorm2(g: MetricField, f, p):
    s, single = _stack(g, p, 0)
    return _out(s.gradnorm2(f), single)


def cotton(g: MetricField, p) -> TensorValue:
    s, single = _stack(g, p, 3)
    return TensorValue(g.dim, ("co",) * 3, _out(s.cotton, single))


def weyl(g: MetricField, p) -> TensorValue:
    if g.dim != 4:
        raise DimensionError("the Weyl tensor is only provided in dimension 4")
    s, single = _stack(g, p, 2)
    return TensorValue(4, ("co",) * 4, _out(s.weyl, single))
