"""Orthonormal frames of indefinite metrics and the Weyl duality split."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .geometry import CurvatureStack, DimensionError, MetricField, _as_points

NULL_TOL = 1e-8


class FrameError(ArithmeticError):
    pass


@dataclass(frozen=True)
class FrameAtPoint:
    """Frame vectors as rows of ``vectors`` with g(e_i, e_j) = signs[i] delta_ij."""

    vectors: np.ndarray
    signs: np.ndarray
    orientation: int

    def gram_residual(self, g: np.ndarray) -> float:
        gram = self.vectors @ g @ self.vectors.T
        return float(np.max(np.abs(gram - np.diag(self.signs))))


def _candidates(d: int) -> np.ndarray:
    eye = np.eye(d)
    rows = [eye[i] for i in range(d)]
    rows += [eye[i] + eye[j] for i, j in combinations(range(d), 2)]
    rows += [eye[i] - eye[j] for i, j in combinations(range(d), 2)]
    return np.array(rows)


def orthonormal_frames(g: np.ndarray, first: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Batched pivoted Gram-Schmidt.

    Returns ``(E, eps)`` with ``E[..., a, :]`` the a-th frame vector, signs
    sorted with + first, and det E > 0.  If ``first`` (a non-null vector per
    point) is given it becomes e_1 after normalisation and no sorting or
    re-orientation is applied.  At each step the first candidate
    (coordinate vectors, then sums, then differences) whose projected norm is
    within a factor 10 of the best available one is taken; candidates with
    |g(v, v)| below 1e-8 of the metric scale count as null.
    """
    g = np.asarray(g, dtype=float)
    batch = g.shape[:-2]
    d = g.shape[-1]
    gf = g.reshape(-1, d, d)
    n = gf.shape[0]
    cand = np.broadcast_to(_candidates(d), (n,) + _candidates(d).shape).copy()
    if first is not None:
        cand = np.concatenate([np.asarray(first, dtype=float).reshape(n, 1, d), cand], axis=1)
    scale = np.max(np.abs(gf), axis=(1, 2))
    E = np.zeros((n, d, d))
    eps = np.zeros((n, d))
    rows = np.arange(n)
    for k in range(d):
        q = np.einsum("nmi,nij,nmj->nm", cand, gf, cand)
        aq = np.abs(q)
        best = aq.max(axis=1)
        if np.any(best <= NULL_TOL * scale):
            bad = int(np.argmax(best <= NULL_TOL * scale))
            raise FrameError(f"no non-null direction left at sample {bad}, step {k}")
        ok = aq >= 0.1 * best[:, None]
        pick = np.argmax(ok, axis=1)
        if k == 0 and first is not None:
            if np.any(aq[:, 0] <= NULL_TOL * scale):
                raise FrameError("the prescribed first vector is null")
            pick = np.zeros(n, dtype=int)
        v = cand[rows, pick]
        qv = q[rows, pick]
        e = v / np.sqrt(np.abs(qv))[:, None]
        s = np.sign(qv)
        E[:, k] = e
        eps[:, k] = s
        # project remaining candidates off the new direction
        ge = np.einsum("nij,nj->ni", gf, e)
        coef = np.einsum("nmi,ni->nm", cand, ge) * s[:, None]
        cand = cand - coef[..., None] * e[:, None, :]
    if first is not None:
        return E.reshape(batch + (d, d)), eps.reshape(batch + (d,))
    order = np.argsort(-eps, axis=1, kind="stable")
    E = np.take_along_axis(E, order[..., None], axis=1)
    eps = np.take_along_axis(eps, order, axis=1)
    neg = np.linalg.det(E) < 0
    E[neg, -1] *= -1.0
    return E.reshape(batch + (d, d)), eps.reshape(batch + (d,))


def orthonormal_frame(g: MetricField, p) -> FrameAtPoint:
    pts, _ = _as_points(p, g.dim)
    gm = g.jet(pts[:1], 0).value[0]
    E, eps = orthonormal_frames(gm)
    return FrameAtPoint(E, eps.astype(int), int(np.sign(np.linalg.det(E))))


def bivector_bases(eps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Self-dual and anti-self-dual bivector bases in an oriented orthonormal frame.

    Returned as antisymmetric frame-component matrices, shape (..., 3, 4, 4).
    Anti-self-dual: e12 - e3e4 e34, e13 + e2e4 e24, e14 - e2e3 e23 (e_i = signs);
    self-dual flips the sign of the second term.
    """
    eps = np.asarray(eps, dtype=float)
    batch = eps.shape[:-1]
    e2, e3, e4 = eps[..., 1], eps[..., 2], eps[..., 3]
    terms = [((0, 1), (2, 3), -e3 * e4), ((0, 2), (1, 3), e2 * e4), ((0, 3), (1, 2), -e2 * e3)]
    plus = np.zeros(batch + (3, 4, 4))
    minus = np.zeros(batch + (3, 4, 4))
    for a, ((i, j), (k, l), c) in enumerate(terms):
        for arr, sgn in ((minus, 1.0), (plus, -1.0)):
            arr[..., a, i, j] = 1.0
            arr[..., a, j, i] = -1.0
            arr[..., a, k, l] = sgn * c
            arr[..., a, l, k] = -sgn * c
    return plus, minus


@dataclass(frozen=True)
class DualitySplit:
    plus: np.ndarray       # res+ per point
    minus: np.ndarray      # res- per point
    cross: np.ndarray      # sum of squares of the mixed block
    total: np.ndarray      # sum of squares of all frame components of W
    blocks: np.ndarray     # (..., 6, 6) W in the basis (Lambda+, Lambda-)

    def vanished_side(self, tol: float) -> str:
        scale = np.maximum(self.total, 1.0)
        p = bool(np.all(self.plus <= tol * scale))
        m = bool(np.all(self.minus <= tol * scale))
        if p and m:
            return "both"
        return "+" if p else ("-" if m else "none")


def duality_from_weyl(W: np.ndarray, g: np.ndarray) -> DualitySplit:
    """Split coordinate Weyl components ``W[..., i, j, k, l]`` at metric ``g``."""
    E, eps = orthonormal_frames(g)
    Wf = np.einsum("...ai,...bj,...ck,...dl,...ijkl->...abcd", E, E, E, E, W, optimize=True)
    plus, minus = bivector_bases(eps)
    basis = np.concatenate([plus, minus], axis=-3)
    blocks = 0.25 * np.einsum("...pij,...qkl,...ijkl->...pq", basis, basis, Wf, optimize=True)
    sq = blocks ** 2
    return DualitySplit(plus=sq[..., :3, :3].sum(axis=(-2, -1)),
                        minus=sq[..., 3:, 3:].sum(axis=(-2, -1)),
                        cross=sq[..., :3, 3:].sum(axis=(-2, -1)),
                        total=(Wf ** 2).sum(axis=(-4, -3, -2, -1)),
                        blocks=blocks)


def duality_residuals(stack: CurvatureStack) -> DualitySplit:
    if stack.dim != 4:
        raise DimensionError("duality split needs dimension 4")
    return duality_from_weyl(stack.weyl, stack.g)


def duality_split(g: MetricField, p):
    """(W+ residual, W- residual, 6x6 block matrix) at a single point."""
    if g.dim != 4:
        raise DimensionError("duality split needs dimension 4")
    pts, _ = _as_points(p, 4)
    s = CurvatureStack(g, pts[:1], 2)
    d = duality_residuals(s)
    return float(d.plus[0]), float(d.minus[0]), d.blocks[0]


def hodge_star_2forms(g: np.ndarray) -> np.ndarray:
    """Hodge star on coordinate 2-forms, as a map of antisymmetric (4, 4) arrays.

    Returns ``H[..., k, l, i, j]`` with (*w)_kl = 1/2 H_klij w_ij.
    """
    from itertools import permutations
    lc = np.zeros((4, 4, 4, 4))
    for perm in permutations(range(4)):
        inv = sum(1 for a in range(4) for b in range(a + 1, 4) if perm[a] > perm[b])
        lc[perm] = (-1) ** inv
    ginv = np.linalg.inv(g)
    vol = np.sqrt(np.abs(np.linalg.det(g)))
    # (*w)_kl = 1/2 w^{ij} eps_{ijkl} sqrt|g|
    return np.einsum("...ia,...jb,abkl->...klij", ginv, ginv, lc) * vol[..., None, None, None, None]
