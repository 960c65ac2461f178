"""Adaptive quadrature and primitive fields."""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import jets as J
from .expr import field_jet, field_label
from .jets import Jet

ABS_TOL = 1e-11
MAX_DEPTH = 40


def adaptive_simpson(fn: Callable[[np.ndarray, np.ndarray], np.ndarray], a, b,
                     tol: float = ABS_TOL) -> np.ndarray:
    """Integrate ``fn`` over many intervals [a_i, b_i] at once.

    ``fn(owner, t)`` evaluates the i-th integrand (``owner`` holds interval
    indices) at abscissae ``t``.  Each interval is refined independently with
    the classic Richardson-corrected Simpson rule until its local error
    estimate falls under its share of ``tol``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size
    out = np.zeros(n)
    owner = np.arange(n)
    m = 0.5 * (a + b)
    fa, fm, fb = fn(owner, a), fn(owner, m), fn(owner, b)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    tols = np.full(n, tol)
    depth = 0
    while owner.size:
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = fn(owner, lm), fn(owner, rm)
        left = (m - a) / 6.0 * (fa + 4 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4 * frm + fb)
        delta = left + right - whole
        done = (np.abs(delta) <= 15 * tols) | (depth >= MAX_DEPTH)
        if not np.all(np.isfinite(delta)):
            raise ArithmeticError("non-finite integrand value during quadrature")
        np.add.at(out, owner[done], (left + right + delta / 15.0)[done])
        keep = ~done
        owner = np.concatenate([owner[keep], owner[keep]])
        a, m, b = (np.concatenate([a[keep], m[keep]]), np.concatenate([lm[keep], rm[keep]]),
                   np.concatenate([m[keep], b[keep]]))
        fa, fm, fb = (np.concatenate([fa[keep], fm[keep]]), np.concatenate([flm[keep], frm[keep]]),
                      np.concatenate([fm[keep], fb[keep]]))
        whole = np.concatenate([left[keep], right[keep]])
        tols = np.concatenate([tols[keep], tols[keep]]) * 0.5
        depth += 1
    return out


class PrimitiveField:
    """Iterated primitive in one coordinate, anchored at 0.

    ``times=1`` gives F(x) = int_0^x q, ``times=2`` gives int_0^x (x - t) q(t) dt,
    so that F'' = q with F(0) = F'(0) = 0.  The integrand ``q`` must depend on
    the coordinate ``var`` only; derivatives of F are read off the jets of q
    and only the value needs quadrature.
    """

    def __init__(self, integrand, var: int, times: int = 1, label: str | None = None, tol: float = ABS_TOL):
        if times not in (1, 2):
            raise ValueError("times must be 1 or 2")
        self.integrand = integrand
        self.var = var
        self.times = times
        self.tol = tol
        self.label = label or f"prim{times}[{field_label(integrand)}]"

    def values(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x = points[:, self.var]

        def fn(owner, t):
            pts = points[owner].copy()
            pts[:, self.var] = t
            q = field_jet(self.integrand, pts, 0).value
            if self.times == 2:
                q = (x[owner] - t) * q
            return q

        return adaptive_simpson(fn, np.zeros_like(x), x, self.tol)

    def jet(self, points, order: int) -> Jet:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = points.shape[1]
        coeffs = np.zeros((J.ncoeffs(n, order), len(points)))
        coeffs[0] = self.values(points)
        if order >= 1:
            if self.times == 2:
                inner = PrimitiveField(self.integrand, self.var, 1, tol=self.tol).jet(points, order - 1)
            else:
                inner = field_jet(self.integrand, points, order - 1)
            pos = J._position(n, order - 1)
            for i, alpha in enumerate(J.multi_indices(n, order)):
                if alpha[self.var] == 0:
                    continue
                beta = list(alpha)
                beta[self.var] -= 1
                coeffs[i] = inner.coeffs[pos[tuple(beta)]] / alpha[self.var]
        return Jet(coeffs, n, order)

    def __call__(self, points) -> np.ndarray:
        return self.values(points)

    def __repr__(self) -> str:
        return f"PrimitiveField({self.label})"
