"""Gradient Ricci soliton residuals and the structural checks built on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import field_jet, parse
from .frames import hodge_star_2forms, orthonormal_frames
from .geometry import CurvatureStack, MetricField, TensorValue

NULL_DEAD_ZONE = 1e-10


@dataclass
class SolitonInstance:
    metric: MetricField
    f: object
    lam: float = 0.0

    def __post_init__(self):
        if isinstance(self.f, str):
            self.f = parse(self.f, self.metric.coords)
        names = getattr(self.f, "variables", None)
        if callable(names):
            extra = names() - set(self.metric.coords)
            if extra:
                raise ValueError(f"potential uses coordinates {sorted(extra)} not in the chart")

    def stack(self, points, order: int = 2) -> CurvatureStack:
        return CurvatureStack(self.metric, np.atleast_2d(points), order)


def _single(p):
    p = np.asarray(p, dtype=float)
    return p.ndim == 1, np.atleast_2d(p)


def _scale(*arrays) -> float:
    return max(1.0, *(float(np.max(np.abs(a))) if np.size(a) else 0.0 for a in arrays))


def residual_from_stack(st: CurvatureStack, f, lam: float) -> np.ndarray:
    return st.hessian(f) + st.ricci - lam * st.g


def grs_residual(s: SolitonInstance, p) -> TensorValue:
    """Hes_f + rho - lambda g."""
    single, pts = _single(p)
    r = residual_from_stack(s.stack(pts, 2), s.f, s.lam)
    return TensorValue(s.metric.dim, ("co", "co"), r[0] if single else r)


def soliton_identities_from_stack(st: CurvatureStack, f, lam: float) -> tuple[float, float, float]:
    """Relative residuals of the three consequences of the soliton equation.

    (1) d tau - 2 rho(grad f, .);  (2) spread of tau + |grad f|^2 - 2 lambda f
    over the samples, scaled by max|tau| + max|grad f|^2;
    (3) R(x,y,z,grad f) + (nabla_x rho)(y,z) - (nabla_y rho)(x,z).
    Needs a stack of order 3.
    """
    fj = field_jet(f, st.points, 1)
    df = fj.gradient()
    grad = np.einsum("nab,nb->na", st.ginv, df)
    dtau = st.dscalar
    ric_grad = np.einsum("nij,nj->ni", st.ricci, grad)
    r1 = float(np.max(np.abs(dtau - 2 * ric_grad))) / _scale(dtau, ric_grad)
    n2 = np.einsum("na,nb,nab->n", df, df, st.ginv)
    q = st.scalar + n2 - 2 * lam * fj.value
    r2 = float(np.ptp(q)) / max(1.0, float(np.max(np.abs(st.scalar)) + np.max(np.abs(n2))))
    lhs = np.einsum("nxyzv,nv->nxyz", st.riemann, grad)
    nr = st.nabla_ricci
    rhs = -nr + np.swapaxes(nr, 1, 2)
    r3 = float(np.max(np.abs(lhs - rhs))) / _scale(lhs, rhs)
    return r1, r2, r3


def lemma1_residuals(s: SolitonInstance, p, ref=None) -> tuple[float, float, float]:
    """Soliton identity residuals at ``p``; item (2) compares against ``ref`` (default: p itself)."""
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    if ref is not None:
        pts = np.concatenate([pts, np.atleast_2d(ref)])
    return soliton_identities_from_stack(s.stack(pts, 3), s.f, s.lam)


def classify_gradient(s: SolitonInstance, p) -> str:
    single, pts = _single(p)
    st = s.stack(pts, 0)
    df = field_jet(s.f, pts, 1).gradient()
    n2 = np.einsum("na,nb,nab->n", df, df, st.ginv)
    out = []
    for v, d in zip(n2, df):
        if np.max(np.abs(d)) < NULL_DEAD_ZONE:
            out.append("zero")
        elif abs(v) < NULL_DEAD_ZONE:
            out.append("null")
        else:
            out.append("spacelike" if v > 0 else "timelike")
    return out[0] if single else out


def ric_nilpotency(s: SolitonInstance, p) -> float:
    _, pts = _single(p)
    ric = s.stack(pts, 2).ricci_op
    return float(np.max(np.abs(np.einsum("nab,nbc->nac", ric, ric))))


# ----------------------------------------------------------------------------
# distributions

def _span_jets(span, points, order: int) -> np.ndarray:
    """Jets of the span vectors, coefficients (nc, N, 2, d)."""
    d = points.shape[1]
    vecs = []
    for v in span:
        comps = []
        for c in v:
            if isinstance(c, str):
                raise TypeError("span components must be Expr objects or numbers")
            comps.append(field_jet(c, points, order).coeffs)
        vecs.append(np.stack(comps, axis=-1))
    return np.stack(vecs, axis=-2)


def walker_residuals(st: CurvatureStack, span) -> tuple[float, float]:
    """(max |g(d_a, d_b)|, max |g(nabla_i d_a, d_b)|), both relative to the metric scale.

    The plane is null, so D^perp = D and a derivative lies in D iff it pairs
    to zero with D.
    """
    from . import jets as J
    c = _span_jets(span, st.points, 1)
    jv = J.Jet(c, st.points.shape[1], 1)
    V = jv.value                                             # (N, 2, d)
    dV = jv.gradient()                                       # (N, 2, d, i)
    g = st.g
    iso = np.einsum("nak,nkl,nbl->nab", V, g, V)
    cov = dV + np.einsum("nkim,nam->naki", st.gamma, V)      # nabla_i d_a, component k
    par = np.einsum("naki,nkl,nbl->niab", cov, g, V)
    sc = _scale(g)
    return float(np.max(np.abs(iso))) / sc, float(np.max(np.abs(par))) / sc


def walker_check(g: MetricField, span, points) -> tuple[float, float]:
    return walker_residuals(CurvatureStack(g, np.atleast_2d(points), 1), span)


def degeneracy_residual(st: CurvatureStack, span) -> float:
    """max |R(d_i, d_a) d_b| over coordinate directions d_i and span vectors."""
    V = np.moveaxis(_span_jets(span, st.points, 0)[0], 0, 0)
    R = st.riemann_op
    out = np.einsum("nijkl,naj,nbk->niabl", R, V, V)
    return float(np.max(np.abs(out))) / _scale(R)


def degeneracy_check(g: MetricField, span, points) -> float:
    return degeneracy_residual(CurvatureStack(g, np.atleast_2d(points), 2), span)


# ----------------------------------------------------------------------------
# frames adapted to the potential

@dataclass(frozen=True)
class Eigenstructure:
    cross: float          # max |rho(e_i, e_1)|, i > 1
    offdiag: float        # max |rho(e_i, e_j)|, i != j
    spread: float         # spread of rho(e_i, e_i) eps_i over i = 2, 3, 4
    signs: np.ndarray


def eigenstructure_from_stack(st: CurvatureStack, f) -> Eigenstructure:
    df = field_jet(f, st.points, 1).gradient()
    grad = np.einsum("nab,nb->na", st.ginv, df)
    E, eps = orthonormal_frames(st.g, first=grad)
    rho = np.einsum("nai,nbj,nij->nab", E, E, st.ricci)
    sc = _scale(rho)
    off = rho - np.einsum("naa->na", rho)[..., None] * np.eye(st.dim)
    tang = np.einsum("naa->na", rho)[:, 1:] * eps[:, 1:]
    return Eigenstructure(float(np.max(np.abs(rho[:, 1:, 0]))) / sc,
                          float(np.max(np.abs(off))) / sc,
                          float(np.max(np.ptp(tang, axis=1))) / sc, eps)


def nonisotropic_eigenstructure(s: SolitonInstance, p) -> Eigenstructure:
    _, pts = _single(p)
    return eigenstructure_from_stack(s.stack(pts, 2), s.f)


@dataclass(frozen=True)
class NullFrameB:
    """Null frame {grad f, u, v, w}: g(grad f, v) = g(u, w) = 1, all other pairings 0."""

    grad: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.stack([self.grad, self.u, self.v, self.w], axis=-2)

    def pairing_residual(self, g: np.ndarray) -> float:
        B = self.matrix()
        gram = np.einsum("...ai,...ij,...bj->...ab", B, g, B)
        target = np.zeros((4, 4))
        target[0, 2] = target[2, 0] = target[1, 3] = target[3, 1] = 1.0
        return float(np.max(np.abs(gram - target)))


def _selfdual_part(g: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Norm of the self-dual component of the 2-form dual to a ^ b, per point."""
    al = np.einsum("nij,nj->ni", g, a)
    bl = np.einsum("nij,nj->ni", g, b)
    w = np.einsum("ni,nj->nij", al, bl) - np.einsum("ni,nj->nij", bl, al)
    H = hodge_star_2forms(g)
    sw = 0.5 * np.einsum("nklij,nij->nkl", H, w)
    return np.max(np.abs(w + sw), axis=(1, 2)) / np.maximum(np.max(np.abs(w), axis=(1, 2)), 1e-300)


def null_frame_b(st: CurvatureStack, f, side: str | None = None) -> NullFrameB:
    """Null frame adapted to a null gradient.

    v pairs to 1 with grad f and is null; (u, w) is a null basis of the
    hyperbolic complement with g(u, w) = 1.  Of the two null lines in the
    complement, u spans the one for which grad f ^ u is self-dual
    (``side="+"``) or anti-self-dual (``side="-"``); the totally null plane
    span{grad f, u} is then an alpha- or beta-plane.  By default the side is
    the one opposite to the vanishing half of W, which on deformed Riemannian
    extensions makes span{grad f, u} the vertical distribution.
    """
    if side is None:
        from .frames import duality_residuals
        vanished = duality_residuals(st).vanished_side(1e-9)
        side = "-" if vanished == "+" else "+"
    g = st.g
    n_pts = len(g)
    df = field_jet(f, st.points, 1).gradient()
    n = np.einsum("nab,nb->na", st.ginv, df)
    pair = np.einsum("na,nab->nb", n, g)                      # g(n, e_i)
    piv = np.argmax(np.abs(pair), axis=1)
    a = np.eye(st.dim)[piv]
    gna = pair[np.arange(n_pts), piv]
    gaa = np.einsum("na,nab,nb->n", a, g, a)
    v = a / gna[:, None] - 0.5 * (gaa / gna ** 2)[:, None] * n
    # orthonormal basis of span{n, v}^perp
    P = np.stack([(n + v) / np.sqrt(2.0), (n - v) / np.sqrt(2.0)], axis=1)
    cand = np.eye(st.dim)[None].repeat(n_pts, 0)
    Pl = np.einsum("nai,nij->naj", P, g)
    sP = np.array([1.0, -1.0])
    cand = cand - np.einsum("nma,nai->nmi", np.einsum("nmj,naj->nma", cand, Pl) * sP, P)
    q = np.einsum("nmi,nij,nmj->nm", cand, g, cand)
    first = np.argmax(np.abs(q), axis=1)
    e1 = cand[np.arange(n_pts), first] / np.sqrt(np.abs(q[np.arange(n_pts), first]))[:, None]
    s1 = np.sign(q[np.arange(n_pts), first])
    rest = cand - np.einsum("nm,ni->nmi", np.einsum("nmi,nij,nj->nm", cand, g, e1) * s1[:, None], e1)
    q2 = np.einsum("nmi,nij,nmj->nm", rest, g, rest)
    second = np.argmax(np.abs(q2), axis=1)
    e2 = rest[np.arange(n_pts), second] / np.sqrt(np.abs(q2[np.arange(n_pts), second]))[:, None]
    ep = np.where((s1 > 0)[:, None], e1, e2)
    em = np.where((s1 > 0)[:, None], e2, e1)
    u1, w1 = (ep + em) / np.sqrt(2.0), (ep - em) / np.sqrt(2.0)
    sd1 = _selfdual_part(g, n, u1)
    # self-dual part of n^u1 small -> n^u1 anti-self-dual
    want_sd = side == "+"
    keep = (sd1 > 0.5) if want_sd else (sd1 <= 0.5)
    u = np.where(keep[:, None], u1, w1)
    w = np.where(keep[:, None], w1, u1)
    return NullFrameB(n, u, v, w)


def ricci_null_frame_residual(st: CurvatureStack, frame: NullFrameB) -> float:
    """max |Ric(grad f)|, |Ric(u)| relative to the Ricci scale."""
    ric = st.ricci_op
    a = np.einsum("nab,nb->na", ric, frame.grad)
    b = np.einsum("nab,nb->na", ric, frame.u)
    return float(max(np.max(np.abs(a)), np.max(np.abs(b)))) / _scale(ric)
