"""Torsion-free connections on surfaces and affine gradient Ricci solitons.

Curvature uses R(X,Y)Z = D_[X,Y]Z - D_X D_Y Z + D_Y D_X Z and the Ricci
tensor rho(x, y) = tr{z -> R(x, z)y}, the same conventions as
:mod:`grslab.geometry`.  Christoffel symbols are keyed ``"kij"`` for
Gamma^k_ij, and array layouts are ``gamma[..., k, i, j]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import jets as J
from .expr import Expr, Field, const, exp, field_jet, field_label, ln, parse, var
from .geometry import CurvatureStack, TensorValue, _perm
from .jets import Jet, jet_einsum
from .quadrature import PrimitiveField

GAMMA_KEYS = ("111", "112", "122", "211", "212", "222")
COORDS = ("x1", "x2")
RANK_TOL = 1e-9


class ConstraintError(ValueError):
    pass


class AffineConnection2D:
    """Torsion-free connection on a surface chart from six component fields."""

    def __init__(self, gamma: dict, coords=COORDS, constants: dict[str, float] | None = None):
        unknown = set(gamma) - set(GAMMA_KEYS)
        if unknown:
            raise KeyError(f"unknown Christoffel keys {sorted(unknown)}")
        self.coords = tuple(coords)
        if len(self.coords) != 2:
            raise ValueError("an affine surface chart has two coordinates")
        comps = {}
        for key in GAMMA_KEYS:
            c = gamma.get(key, 0.0)
            if isinstance(c, str):
                c = parse(c, self.coords, constants)
            elif isinstance(c, (int, float)):
                c = float(c)
            comps[key] = c
        self.gamma = comps

    def component(self, k: int, i: int, j: int):
        """Gamma^k_ij with 1-based indices."""
        i, j = min(i, j), max(i, j)
        return self.gamma[f"{k}{i}{j}"]

    def jet(self, points, order: int) -> Jet:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = points.shape[1]
        cache = {}
        out = np.zeros((J.ncoeffs(n, order), len(points), 2, 2, 2))
        for key, c in self.gamma.items():
            if isinstance(c, float) and c == 0.0:
                continue
            if id(c) not in cache:
                cache[id(c)] = field_jet(c, points, order).coeffs
            k, i, j = (int(ch) - 1 for ch in key)
            out[..., k, i, j] = cache[id(c)]
            out[..., k, j, i] = cache[id(c)]
        return Jet(out, n, order)

    def __repr__(self) -> str:
        parts = ", ".join(f"{k}: {field_label(v)}" for k, v in self.gamma.items()
                          if not (isinstance(v, float) and v == 0.0))
        return f"AffineConnection2D({{{parts}}})"


@dataclass
class AffineSoliton:
    connection: AffineConnection2D
    h: object
    notes: dict = field(default_factory=dict)


class AffineStack:
    """Curvature of a surface connection at a batch of points.

    ``order`` is the jet order of the Christoffel symbols; 1 gives curvature
    values, 2 adds the covariant derivative of Ricci.
    """

    def __init__(self, D: AffineConnection2D, points, order: int = 2):
        self.D = D
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.points.shape[1] != 2:
            raise ValueError("surface points must have two coordinates")
        self.order = order
        self.gamma_jet = D.jet(self.points, order)

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_jet.value

    @cached_property
    def riemann_op_jet(self) -> Jet:
        G = self.gamma_jet
        dG = G.grad()
        G = G.truncate(self.order - 1)
        std = (_perm(dG, "ljki->ijkl") - _perm(dG, "likj->ijkl")
               + jet_einsum("mjk,lim->ijkl", G, G) - jet_einsum("mik,ljm->ijkl", G, G))
        return -std

    @cached_property
    def ricci_jet(self) -> Jet:
        return _perm(self.riemann_op_jet, "ijkj->ik")

    @property
    def riemann_op(self) -> np.ndarray:
        return self.riemann_op_jet.value

    @property
    def ricci(self) -> np.ndarray:
        return self.ricci_jet.value

    @property
    def ricci_sym(self) -> np.ndarray:
        r = self.ricci
        return 0.5 * (r + np.swapaxes(r, -1, -2))

    @property
    def ricci_ant(self) -> np.ndarray:
        r = self.ricci
        return 0.5 * (r - np.swapaxes(r, -1, -2))

    @cached_property
    def ricci_sym_jet(self) -> Jet:
        return (self.ricci_jet + _perm(self.ricci_jet, "ij->ji")) * 0.5

    @cached_property
    def nabla_ricci(self) -> np.ndarray:
        """(D_i rho)(d_j, d_k) as ``[..., i, j, k]``."""
        if self.order < 2:
            raise ValueError("covariant derivative of Ricci needs Christoffel jets of order 2")
        r = self.ricci
        G = self.gamma
        return (np.einsum("...jki->...ijk", self.ricci_jet.gradient())
                - np.einsum("...mij,...mk->...ijk", G, r)
                - np.einsum("...mik,...jm->...ijk", G, r))

    def hessian(self, h) -> np.ndarray:
        hj = field_jet(h, self.points, 2)
        return hj.hessian() - np.einsum("...kij,...k->...ij", self.gamma, hj.gradient())

    def soliton_residual(self, h) -> np.ndarray:
        return self.hessian(h) + 2.0 * self.ricci_sym

    def identity_residual(self) -> np.ndarray:
        """R(x,y)z - (rho(x,z)y - rho(y,z)x) componentwise.

        In dimension two the curvature is determined by Ricci.  With the sign
        convention above the relation reads R(x,y)z = rho(x,z)y - rho(y,z)x,
        the negative of the form usual for the opposite curvature sign.
        """
        r = self.ricci
        eye = np.eye(2)
        model = np.einsum("...ik,jl->...ijkl", r, eye) - np.einsum("...jk,il->...ijkl", r, eye)
        return self.riemann_op - model


def _single(points):
    p = np.asarray(points, dtype=float)
    return p.ndim == 1, np.atleast_2d(p)


def _out(a, single):
    return a[0] if single else a


def affine_curvature(D: AffineConnection2D, p) -> TensorValue:
    """Components [i, j, k, l] = l-th component of R(d_i, d_j)d_k."""
    single, pts = _single(p)
    return TensorValue(2, ("co", "co", "co", "contra"), _out(AffineStack(D, pts, 1).riemann_op, single))


def affine_ricci(D: AffineConnection2D, p) -> TensorValue:
    single, pts = _single(p)
    return TensorValue(2, ("co", "co"), _out(AffineStack(D, pts, 1).ricci, single))


def ricci_split(D: AffineConnection2D, p) -> tuple[np.ndarray, np.ndarray]:
    single, pts = _single(p)
    s = AffineStack(D, pts, 1)
    return _out(s.ricci_sym, single), _out(s.ricci_ant, single)


def affine_soliton_residual(s: AffineSoliton, p) -> TensorValue:
    """Hes^D_h + 2 rho^D_sym."""
    single, pts = _single(p)
    st = AffineStack(s.connection, pts, 1)
    return TensorValue(2, ("co", "co"), _out(st.soliton_residual(s.h), single))


def projective_flatness_test(D: AffineConnection2D, points) -> tuple[float, float]:
    """(max |rho_ant|, max |(D_x rho)(y,z) - (D_y rho)(x,z)|) over the samples."""
    st = AffineStack(D, np.atleast_2d(points), 2)
    nr = st.nabla_ricci
    return float(np.max(np.abs(st.ricci_ant))), float(np.max(np.abs(nr - np.swapaxes(nr, -3, -2))))


def typeB_projflat_conditions(g: dict, substitute: bool = True) -> tuple[float, float]:
    """The two polynomial projective-flatness conditions on Type B constants.

    With ``substitute`` the symmetric-Ricci relation gamma^2_22 = -gamma^1_12
    is imposed before evaluating.
    """
    c = {k: float(g.get(k, 0.0)) for k in GAMMA_KEYS}
    g111, g112, g122, g211, g212, g222 = (c[k] for k in GAMMA_KEYS)
    if substitute:
        g222 = -g112
    e1 = 2 * g112 * g212 - 3 * g211 * g122 + (2 + g111) * g222
    e2 = g112 ** 2 - 2 * g112 * g222 + g122 * (1 - g111 + 2 * g212)
    return e1, e2


def _rank(m: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(m, compute_uv=False)
    top = s[..., :1]
    return np.sum(s > RANK_TOL * np.maximum(top, 1e-300), axis=-1) * (top[..., 0] > 1e-14)


def ricci_rank(D: AffineConnection2D, points) -> int:
    """Largest rank of rho^D over the samples (singular values thresholded at 1e-9 relative)."""
    st = AffineStack(D, np.atleast_2d(points), 1)
    return int(np.max(_rank(st.ricci)))


def ricci_kernel_parallel(D: AffineConnection2D, points) -> float:
    """max |(D_x rho)(k, .)| for k the unit kernel direction of rho_sym, relative.

    For a symmetric rank-one Ricci tensor this vanishes exactly when ker rho is parallel.
    """
    st = AffineStack(D, np.atleast_2d(points), 2)
    w, v = np.linalg.eigh(st.ricci_sym)
    k = np.take_along_axis(v, np.argmin(np.abs(w), axis=-1)[:, None, None], axis=-1)[..., 0]
    nr = st.nabla_ricci
    r = np.einsum("nijk,nj->nik", nr, k)
    return float(np.max(np.abs(r))) / max(1.0, float(np.max(np.abs(nr))))


@dataclass(frozen=True)
class Recurrence:
    is_recurrent: bool
    omega: np.ndarray      # (N, 2)
    residual: float        # max |D rho - omega (x) rho| / max(|D rho|, tiny)


def recurrence_check(D: AffineConnection2D, points, tol: float = 1e-9) -> Recurrence:
    """Least-squares fit of D rho = omega (x) rho at each point."""
    st = AffineStack(D, np.atleast_2d(points), 2)
    nr = st.nabla_ricci
    r = st.ricci
    rr = np.einsum("...jk,...jk->...", r, r)
    if np.any(rr < 1e-300):
        raise ArithmeticError("recurrence is undefined where the Ricci tensor vanishes")
    omega = np.einsum("...ijk,...jk->...i", nr, r) / rr[..., None]
    res = np.max(np.abs(nr - np.einsum("...i,...jk->...ijk", omega, r)))
    scale = max(float(np.max(np.abs(nr))), 1e-300)
    return Recurrence(bool(res <= tol * max(scale, 1.0)), omega, float(res / max(scale, 1.0)))


# ----------------------------------------------------------------------------
# families

def _x(i: int) -> Expr:
    return var(COORDS[i - 1], i - 1)


def type_a(g: dict) -> AffineConnection2D:
    return AffineConnection2D({k: float(g.get(k, 0.0)) for k in GAMMA_KEYS})


def type_b(g: dict) -> AffineConnection2D:
    x1 = _x(1)
    comps = {}
    for k in GAMMA_KEYS:
        v = float(g.get(k, 0.0))
        if v != 0.0:
            comps[k] = const(v) / x1
    return AffineConnection2D(comps)


def type_a_rho11(g: dict) -> float:
    c = {k: float(g.get(k, 0.0)) for k in GAMMA_KEYS}
    return c["111"] * c["212"] + c["211"] * c["222"] - c["212"] ** 2


def typeA_soliton_solve(g: dict) -> AffineSoliton:
    """Potential h(x1) of a rank-one Type A connection (particular solution)."""
    c = {k: float(g.get(k, 0.0)) for k in GAMMA_KEYS}
    if c["112"] != 0.0 or c["122"] != 0.0:
        raise ConstraintError("Type A solitons here need gamma^1_12 = gamma^1_22 = 0")
    rho11 = type_a_rho11(c)
    r = -2.0 * rho11
    x1 = _x(1)
    if c["111"] != 0.0:
        h = const(-r / c["111"]) * x1
        form = "h = -r x1 / g111 (homogeneous constant c = 0)"
    else:
        h = const(r / 2.0) * x1 ** 2
        form = "h = r x1^2 / 2"
    return AffineSoliton(type_a(c), h, {"rho11": rho11, "r": r, "form": form})


def typeB_case_i_soliton(g111: float, g211: float, g212: float) -> AffineSoliton:
    """Projectively flat Type B connection with gamma^1_12 = gamma^1_22 = gamma^2_22 = 0.

    rho = gamma^2_12 (gamma^1_11 - gamma^2_12 + 1) / x1^2 dx1 (x) dx1, and
    h = A ln x1 with A (1 + gamma^1_11) = 2 gamma^2_12 (gamma^1_11 - gamma^2_12 + 1).
    """
    if g111 == -1.0:
        raise ConstraintError("the logarithmic potential needs gamma^1_11 != -1")
    A = 2.0 * g212 * (g111 - g212 + 1.0) / (1.0 + g111)
    D = type_b({"111": g111, "211": g211, "212": g212})
    return AffineSoliton(D, const(A) * ln(_x(1)), {"A": A, "omega_x1": -2.0 * (1.0 + g111)})


def case_ii_gammas(g111: float, g112: float, g122: float) -> dict:
    """Type B constants of the projectively flat case (ii), gamma^2_22 = -gamma^1_12."""
    if g122 == 0.0:
        raise ConstraintError("case (ii) needs gamma^1_22 != 0")
    g212 = 0.5 * (g111 - 1.0 - 3.0 * g112 ** 2 / g122)
    g211 = -g112 ** 3 / g122 ** 2 - g112 / g122
    return {"111": g111, "112": g112, "122": g122, "211": g211, "212": g212, "222": -g112}


def nonprojflat_example(g122: float = 1.0, alpha: float = 1.0, beta: float = 0.0) -> AffineSoliton:
    x1, x2 = _x(1), _x(2)
    D = AffineConnection2D({"111": const(-1.0) / x1, "122": const(g122) / x1})
    h = const(-4.0) * ln(x1) + const(alpha) * x2 + const(beta)
    return AffineSoliton(D, h, {"gamma122": g122, "alpha": alpha, "beta": beta})


def rank2_connection(g212: float, g122: float, sign: int) -> AffineConnection2D:
    s = math.sqrt(1.0 + 2.0 * g212)
    return type_b({"111": g212 + sign * s, "212": g212, "122": g122})


def rank2_potential(g212: float, reading: str, kappa: float = 0.0) -> Expr:
    """The two readings of the nested-sign potential.

    ``"upper"``: kappa + 2(-1 + s) ln(x1 - x1 s); ``"lower"``: kappa - 2(1 - s) ln(x1 + x1 s),
    with s = sqrt(1 + 2 gamma^2_12).
    """
    s = math.sqrt(1.0 + 2.0 * g212)
    x1 = _x(1)
    if reading == "upper":
        return const(kappa) + const(2.0 * (-1.0 + s)) * ln(x1 - const(s) * x1)
    if reading == "lower":
        return const(kappa) - const(2.0 * (1.0 - s)) * ln(x1 + const(s) * x1)
    raise ValueError("reading must be 'upper' or 'lower'")


@dataclass(frozen=True)
class SignResolution:
    sign: int
    reading: str
    residual: float
    table: dict


def rank2_resolve(g212: float, g122: float, points, kappa: float = 0.0) -> SignResolution:
    """Pick the (Christoffel sign, potential reading) pair by residual minimisation."""
    table = {}
    for sign in (1, -1):
        D = rank2_connection(g212, g122, sign)
        for reading in ("upper", "lower"):
            h = rank2_potential(g212, reading, kappa)
            try:
                st = AffineStack(D, points, 1)
                res = float(np.max(np.abs(st.soliton_residual(h))))
            except ArithmeticError:
                res = math.inf
            table[(sign, reading)] = res
    best = min(table, key=table.get)
    return SignResolution(best[0], best[1], table[best], table)


def rho_metric_scalar(D: AffineConnection2D, points) -> np.ndarray:
    """Scalar curvature (twice the Gauss curvature) of the metric rho^D_sym."""
    st = AffineStack(D, points, 3)
    return CurvatureStack(st.ricci_sym_jet, points).scalar


def rank2_tau_formula(g212: float, sign: int = 1) -> float:
    s = math.sqrt(1.0 + 2.0 * g212)
    return (1.0 - sign * s) / g212 ** 2


def opozda_family_build(g12, alpha, beta, kappa: float) -> AffineSoliton:
    """Non-projectively-flat soliton with symmetric rank-one Ricci and parallel kernel.

    ``g12``, ``alpha``, ``beta`` are fields of x2 alone (Expr over (x1, x2),
    numbers, or anything with ``jet``).  The primitive Xi of ``g12`` is exact
    when ``g12`` is constant and computed by adaptive quadrature otherwise.
    """
    if kappa == 0.0:
        raise ConstraintError("kappa = 0 is the projectively flat branch")
    for name, fld in (("gamma^1_12", g12), ("alpha", alpha), ("beta", beta)):
        if isinstance(fld, Expr) and 0 in {i for i in range(2) if COORDS[i] in fld.variables()}:
            raise ConstraintError(f"{name} must depend on x2 only")
    x1, x2 = _x(1), _x(2)
    g12 = _lift(g12)
    alpha = _lift(alpha)
    beta = _lift(beta)
    if isinstance(g12, Expr) and g12.is_constant:
        xi = g12 * x2
        closed = True
    else:
        xi = PrimitiveField(g12, 1, 1, label=f"Xi[{field_label(g12)}]")
        closed = False

    def _g122(x1j, gj, xij, aj, bj):
        k = x1j.order - 1
        dg = gj.derivative(1)
        x1k, gk, xik, ak, bk = (t.truncate(k) for t in (x1j, gj, xij, aj, bj))
        expo = J.jet_exp(x1k * (0.5 * kappa) * J.jet_exp(xik) - xik)
        return J.jet_mul(ak, expo) * (2.0 / kappa) + bk + J.jet_mul(x1k, J.jet_mul(gk, gk) + dg)

    g122 = Field(_g122, x1, g12, xi, alpha, beta, label="opozda_G122", extra_order=1)

    if isinstance(xi, Expr):
        integrand = beta * const(kappa) * exp(xi)
        hhat = const(kappa) * exp(xi)
    else:
        integrand = Field(lambda b, X: J.jet_mul(b, J.jet_exp(X)) * kappa, beta, xi, label="beta*hhat")
        hhat = Field(lambda X: J.jet_exp(X) * kappa, xi, label="hhat")
    htilde = PrimitiveField(integrand, 1, 2, label="htilde")
    h = Field(lambda a, x, b: a + J.jet_mul(x, b), htilde, x1, hhat, label="opozda_h")
    D = AffineConnection2D({"112": g12, "122": g122})
    return AffineSoliton(D, h, {"kappa": kappa, "xi_closed_form": closed})


def _lift(f):
    if isinstance(f, str):
        return parse(f, COORDS)
    if isinstance(f, (int, float)):
        return const(float(f))
    return f
