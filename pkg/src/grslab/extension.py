"""Deformed Riemannian extensions of affine surfaces.

Chart order is (x1, x2, x1', x2') -> array indices (0, 1, 2, 3); the fiber
coordinates are named ``x1'`` and ``x2'``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets as J
from .affine import GAMMA_KEYS, AffineConnection2D, AffineStack
from .expr import Expr, Field, const, field_jet, parse, var
from .frames import duality_residuals
from .geometry import CurvatureStack, MetricField

CHART = ("x1", "x2", "x1'", "x2'")
BASE = ("x1", "x2")
PHI_KEYS = ("11", "12", "22")


class CoordinateMismatch(ValueError):
    pass


def _zero(c) -> bool:
    return isinstance(c, (int, float)) and float(c) == 0.0 or (isinstance(c, Expr) and c.kind == "const" and c.value == 0.0)


@dataclass
class DeformationTensor:
    """Symmetric (0,2)-tensor on the surface, three component fields."""

    phi11: object = 0.0
    phi12: object = 0.0
    phi22: object = 0.0

    @classmethod
    def from_strings(cls, comps: dict, constants: dict | None = None) -> "DeformationTensor":
        unknown = set(comps) - set(PHI_KEYS)
        if unknown:
            raise KeyError(f"unknown deformation keys {sorted(unknown)}")
        vals = {k: parse(v, BASE, constants) if isinstance(v, str) else v for k, v in comps.items()}
        return cls(vals.get("11", 0.0), vals.get("12", 0.0), vals.get("22", 0.0))

    def component(self, i: int, j: int):
        i, j = min(i, j), max(i, j)
        return {(1, 1): self.phi11, (1, 2): self.phi12, (2, 2): self.phi22}[(i, j)]

    def jet(self, points, order: int) -> J.Jet:
        """Component matrix jets, coefficients shaped (nc, N, 2, 2)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((J.ncoeffs(points.shape[1], order), len(points), 2, 2))
        for i in (1, 2):
            for j in (i, 2):
                c = self.component(i, j)
                if _zero(c):
                    continue
                cj = field_jet(c, points, order).coeffs
                out[..., i - 1, j - 1] = cj
                out[..., j - 1, i - 1] = cj
        return J.Jet(out, points.shape[1], order)


def _is_expr(c) -> bool:
    return isinstance(c, (Expr, int, float))


def _lift(c) -> Expr:
    return const(float(c)) if isinstance(c, (int, float)) else c


def _component(phi, g1, g2) -> object:
    """phi - 2 x1' g1 - 2 x2' g2, symbolic when every input is an Expr."""
    y1, y2 = var(CHART[2], 2), var(CHART[3], 3)
    if all(_is_expr(c) for c in (phi, g1, g2)):
        out = None
        for coef, fld in ((None, phi), (y1, g1), (y2, g2)):
            if _zero(fld):
                continue
            term = _lift(fld) if coef is None else const(-2.0) * coef * _lift(fld)
            out = term if out is None else out + term
        return const(0.0) if out is None else out

    def fn(p, a, b, u1, u2):
        return p - J.jet_mul(u1, a) * 2.0 - J.jet_mul(u2, b) * 2.0

    return Field(fn, phi, g1, g2, y1, y2, label="ext_component")


class ExtensionChart:
    """(T*Sigma, g_{D,Phi}) over the chart (x1, x2, x1', x2')."""

    def __init__(self, D: AffineConnection2D, phi: DeformationTensor | None = None):
        if tuple(D.coords) != BASE:
            raise CoordinateMismatch(f"base connection must use coordinates {BASE}, got {D.coords}")
        self.D = D
        self.phi = phi or DeformationTensor()
        self._metric = None

    @property
    def metric(self) -> MetricField:
        if self._metric is None:
            self._metric = build_extension(self.D, self.phi)
        return self._metric


def build_extension(D: AffineConnection2D, phi: DeformationTensor | None = None) -> MetricField:
    phi = phi or DeformationTensor()
    if tuple(D.coords) != BASE:
        raise CoordinateMismatch(f"base connection must use coordinates {BASE}, got {D.coords}")
    g11 = _component(phi.phi11, D.component(1, 1, 1), D.component(2, 1, 1))
    g12 = _component(phi.phi12, D.component(1, 1, 2), D.component(2, 1, 2))
    g22 = _component(phi.phi22, D.component(1, 2, 2), D.component(2, 2, 2))
    one, zero = const(1.0), const(0.0)
    grid = [[g11, g12, one, zero],
            [g12, g22, zero, one],
            [one, zero, zero, zero],
            [zero, one, zero, zero]]
    return MetricField(CHART, grid, signature="neutral")


# ----------------------------------------------------------------------------
# potentials

def evaluation_map(X) -> Expr:
    """iota X = x1' X^1 + x2' X^2 for a base vector field (X^1, X^2)."""
    y1, y2 = var(CHART[2], 2), var(CHART[3], 3)
    X1, X2 = (parse(c, BASE) if isinstance(c, str) else _lift(c) for c in X)
    return y1 * X1 + y2 * X2


def pullback(h):
    """pi^* h; base coordinates keep their chart indices, so the field is reused."""
    if isinstance(h, str):
        return parse(h, BASE)
    return h


def potential_general(X, h) -> Expr:
    return evaluation_map(X) + pullback(h)


# ----------------------------------------------------------------------------
# closed forms displayed for extensions

def christoffel_closed_form(D: AffineConnection2D, phi: DeformationTensor, points) -> np.ndarray:
    """Levi-Civita symbols of g_{D,Phi} assembled from the base data, ``[..., k, i, j]``."""
    pts = np.atleast_2d(points)
    base = pts[:, :2]
    gj = D.jet(base, 1)
    G = gj.value                  # [n, k, i, j]
    dG = gj.gradient()            # [n, k, i, j, m]
    pj = phi.jet(base, 1)
    P = pj.value
    dP = pj.gradient()            # [n, i, j, m]
    y = pts[:, 2:]
    n = len(pts)
    out = np.zeros((n, 4, 4, 4))
    out[:, :2, :2, :2] = G
    # Gamma^{k'}_{i' j} = -Gamma^i_{jk};  Gamma^{k'}_{i j'} = -Gamma^j_{ik}
    out[:, 2:, 2:, :2] = -np.einsum("nijk->nkij", G)
    out[:, 2:, :2, 2:] = -np.einsum("njik->nkij", G)
    lin = (np.einsum("nrijk->nrkij", dG) - np.einsum("nrjki->nrkij", dG) - np.einsum("nrikj->nrkij", dG)
           + 2.0 * np.einsum("nrkl,nlij->nrkij", G, G))
    fib = (np.einsum("nr,nrkij->nkij", y, lin)
           + 0.5 * (np.einsum("njki->nkij", dP) + np.einsum("nikj->nkij", dP) - np.einsum("nijk->nkij", dP))
           - np.einsum("nkl,nlij->nkij", P, G))
    out[:, 2:, :2, :2] = fib
    return out


def ricci_closed_form(D: AffineConnection2D, points) -> np.ndarray:
    """The displayed Ricci components of g_{D,Phi}, base block only."""
    base = np.atleast_2d(points)[:, :2]
    gj = D.jet(base, 1)
    G = gj.value
    dG = gj.gradient()

    def g(k, i, j):
        return G[:, k - 1, i - 1, j - 1]

    def d(m, k, i, j):
        return dG[:, k - 1, i - 1, j - 1, m - 1]

    r11 = 2 * (g(1, 1, 1) * g(2, 1, 2) - g(2, 1, 2) ** 2 + g(2, 1, 1) * (g(2, 2, 2) - g(1, 1, 2))
               + d(2, 2, 1, 1) - d(1, 2, 1, 2))
    r12 = (2 * (g(1, 1, 2) * g(2, 1, 2) - g(2, 1, 1) * g(1, 2, 2))
           - (d(2, 1, 1, 1) - d(2, 2, 1, 2)) + (d(1, 1, 1, 2) - d(1, 2, 2, 2)))
    r22 = 2 * ((g(1, 1, 1) - g(2, 1, 2)) * g(1, 2, 2) + g(1, 1, 2) * g(2, 2, 2) - g(1, 1, 2) ** 2
               - d(2, 1, 1, 2) + d(1, 1, 2, 2))
    out = np.zeros((len(base), 4, 4))
    out[:, 0, 0] = r11
    out[:, 0, 1] = out[:, 1, 0] = r12
    out[:, 1, 1] = r22
    return out


def _scale(*arrays) -> float:
    return max(1.0, *(float(np.max(np.abs(a))) if np.size(a) else 0.0 for a in arrays))


def extension_christoffel_check(chart: ExtensionChart, points) -> float:
    s = CurvatureStack(chart.metric, points, 1)
    ref = christoffel_closed_form(chart.D, chart.phi, s.points)
    return float(np.max(np.abs(s.gamma - ref))) / _scale(ref)


def extension_ricci_check(chart: ExtensionChart, points) -> float:
    """Deviation of rho from 2 pi^* rho^D_sym (zero off the base block)."""
    s = CurvatureStack(chart.metric, points, 2)
    ast = AffineStack(chart.D, s.points[:, :2], 1)
    ref = np.zeros_like(s.ricci)
    ref[:, :2, :2] = 2.0 * ast.ricci_sym
    return float(np.max(np.abs(s.ricci - ref))) / _scale(ref)


def hessian_closed_form_check(chart: ExtensionChart, h, points) -> float:
    """Hes_{pi^* h} has only base components, equal to Hes^D_h."""
    s = CurvatureStack(chart.metric, points, 1)
    hes = s.hessian(pullback(h))
    ref = np.zeros_like(hes)
    ref[:, :2, :2] = AffineStack(chart.D, s.points[:, :2], 1).hessian(h)
    return float(np.max(np.abs(hes - ref))) / _scale(ref)


def iota_hessian_check(chart: ExtensionChart, h, points) -> float:
    """Mixed components of Hes_f for f = x1' + pi^* h against the base symbols."""
    s = CurvatureStack(chart.metric, points, 1)
    hes = s.hessian(potential_general((1.0, 0.0), pullback(h)))
    G = AffineStack(chart.D, s.points[:, :2], 0 + 1).gamma
    ref = np.stack([G[:, 0, 0, 0], G[:, 1, 0, 0], G[:, 0, 0, 1], G[:, 1, 0, 1]], axis=-1)
    got = np.stack([hes[:, 0, 2], hes[:, 0, 3], hes[:, 1, 2], hes[:, 1, 3]], axis=-1)
    return float(np.max(np.abs(got - ref))) / _scale(ref)


def theorem2_equivalence(D: AffineConnection2D, phi: DeformationTensor, h, points) -> tuple[float, float]:
    """(sup of the affine soliton residual, sup of the 4D steady soliton residual)."""
    chart = ExtensionChart(D, phi)
    s = CurvatureStack(chart.metric, points, 2)
    res4 = s.hessian(pullback(h)) + s.ricci
    aff = AffineStack(D, s.points[:, :2], 1).soliton_residual(h)
    return float(np.max(np.abs(aff))), float(np.max(np.abs(res4)))


@dataclass(frozen=True)
class ConstraintCheck:
    satisfied: bool
    lam: float
    residual: float


def eq55_constraint_check(D: AffineConnection2D, points, tol: float = 1e-10) -> ConstraintCheck:
    """Constraints Gamma^1_11 = Gamma^2_12 = lambda, Gamma^2_11 = Gamma^1_12 = 0 (lambda constant)."""
    G = AffineStack(D, np.atleast_2d(points)[:, :2], 1).gamma
    lam_field = G[:, 0, 0, 0]
    lam = float(np.mean(lam_field))
    r = np.concatenate([lam_field - lam, G[:, 1, 0, 1] - lam, G[:, 1, 0, 0], G[:, 0, 0, 1]])
    res = float(np.max(np.abs(r))) / max(1.0, abs(lam))
    return ConstraintCheck(res <= tol, lam, res)


# ----------------------------------------------------------------------------
# structural checks

def fiber_span():
    """ker pi_* = span{d/dx1', d/dx2'} as constant component tuples."""
    return ((0.0, 0.0, 1.0, 0.0), (0.0, 0.0, 0.0, 1.0))


def weyl_slope_check(chart: ExtensionChart, base_points) -> dict:
    """Weyl components against the base Ricci data.

    Returns relative residuals of W(1,2,1,1') = W(1,2,2,2') = (rho12 - rho21)/2
    and of the fiber slopes of W(1,2,1,2); the fiber-independent part of the
    latter (a polynomial in the deformation) is reported, not tested.
    """
    bp = np.atleast_2d(base_points)[:, :2]
    n = len(bp)
    fibers = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    pts = np.concatenate([np.column_stack([bp, np.tile(f, (n, 1))]) for f in fibers])
    W = CurvatureStack(chart.metric, pts, 2).weyl.reshape(3, n, 4, 4, 4, 4)
    ast = AffineStack(chart.D, bp, 2)
    r = ast.ricci
    nr = ast.nabla_ricci
    half = 0.5 * (r[:, 0, 1] - r[:, 1, 0])
    e1 = np.max(np.abs(W[:, :, 0, 1, 0, 2] - half))
    e2 = np.max(np.abs(W[:, :, 0, 1, 1, 3] - half))
    w1212 = W[:, :, 0, 1, 0, 1]
    slope1 = w1212[1] - w1212[0]
    slope2 = w1212[2] - w1212[0]
    ref1 = nr[:, 0, 1, 1] - nr[:, 1, 1, 0]
    ref2 = nr[:, 1, 0, 0] - nr[:, 0, 0, 1]
    scale = _scale(half, ref1, ref2)
    return {"w121p": float(e1) / scale, "w122p": float(e2) / scale,
            "slope1": float(np.max(np.abs(slope1 - ref1))) / scale,
            "slope2": float(np.max(np.abs(slope2 - ref2))) / scale,
            "theta": w1212[0]}


def curvature_block_check(chart: ExtensionChart, points, seed: int = 0) -> float:
    """Block shape of R(x,y) for random x, y: upper-left R^D, upper-right 0, lower-right -R^D^T."""
    s = CurvatureStack(chart.metric, points, 2)
    rng = np.random.default_rng(seed)
    n = len(s.points)
    x = rng.normal(size=(n, 4))
    y = rng.normal(size=(n, 4))
    M = np.einsum("ni,nj,nijkl->nlk", x, y, s.riemann_op)
    RD = np.einsum("ni,nj,nijkl->nlk", x[:, :2], y[:, :2], AffineStack(chart.D, s.points[:, :2], 1).riemann_op)
    dev = np.concatenate([(M[:, :2, :2] - RD).ravel(), M[:, :2, 2:].ravel(),
                          (M[:, 2:, 2:] + np.swapaxes(RD, 1, 2)).ravel()])
    return float(np.max(np.abs(dev))) / _scale(M)


def compatibility_residual(chart: ExtensionChart, h, points) -> float:
    """R(x,y) grad(pi^* h) - ((nabla_x Ric)y - (nabla_y Ric)x) over coordinate pairs."""
    s = CurvatureStack(chart.metric, points, 3)
    grad = s.gradient(pullback(h))
    lhs = np.einsum("nijkl,nk->nijl", s.riemann_op, grad)
    nric = np.einsum("nab,nijb->nija", s.ginv, s.nabla_ricci)  # (nabla_i Ric) d_j, component a
    rhs = nric - np.swapaxes(nric, 1, 2)
    return float(np.max(np.abs(lhs - rhs))) / _scale(lhs, rhs)


def solve_compatibility_gradient(D: AffineConnection2D, base_points) -> np.ndarray:
    """Gradient (dh/dx1, dh/dx2) forced by the compatibility condition on g_D.

    With grad(pi^* h) = h_1 d/dx1' + h_2 d/dx2', the condition for x = d1,
    y = d2 is a 4x2 linear system, solved by least squares at each point.
    """
    bp = np.atleast_2d(base_points)[:, :2]
    pts = np.column_stack([bp, np.zeros((len(bp), 2))])
    s = CurvatureStack(ExtensionChart(D).metric, pts, 3)
    A = s.riemann_op[:, 0, 1, 2:, :]                    # rows: fiber direction k, cols: component l
    A = np.swapaxes(A, 1, 2)                            # (n, 4, 2)
    nric = np.einsum("nab,nijb->nija", s.ginv, s.nabla_ricci)
    rhs = nric[:, 0, 1] - nric[:, 1, 0]
    out = np.empty((len(bp), 2))
    for i in range(len(bp)):
        out[i] = np.linalg.lstsq(A[i], rhs[i], rcond=None)[0]
    return out


def extension_battery(chart: ExtensionChart, points) -> dict:
    """Scalar flatness, Ricci nilpotency, one-sided duality, Walker and degeneracy residuals.

    All values are relative to max(1, natural scale).
    """
    from .solitons import degeneracy_residual, walker_residuals
    s = CurvatureStack(chart.metric, points, 2)
    ric = s.ricci_op
    rr = np.einsum("nab,nbc->nac", ric, ric)
    dual = duality_residuals(s)
    total = np.maximum(dual.total, 1.0)
    span = fiber_span()
    iso, par = walker_residuals(s, span)
    return {
        "scalar": float(np.max(np.abs(s.scalar))) / _scale(s.ricci),
        "ric_nilpotent": float(np.max(np.abs(rr))) / _scale(ric) ** 2,
        "duality_min": float(min(np.max(dual.plus / total), np.max(dual.minus / total))),
        "duality_side": dual.vanished_side(1e-9),
        "walker_isotropy": iso,
        "walker_parallel": par,
        "degeneracy": degeneracy_residual(s, span),
    }
