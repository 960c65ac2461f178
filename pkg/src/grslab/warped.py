"""Non-isotropic warped-product solitons and locally conformally flat plane waves."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import jets as J
from .expr import Expr, Field, parse, to_string
from .geometry import MetricField
from .jets import Jet
from .quadrature import PrimitiveField
from .solitons import SolitonInstance

SINGULAR_TOL = 1e-8
WARPED_COORDS = ("t", "y1", "y2", "y3")
FIBER_COORDS = ("y1", "y2", "y3")
PLANE_WAVE_COORDS = ("u", "v", "x1", "x2")


class WarpedDomainError(ValueError):
    pass


class CurvatureMismatch(ValueError):
    pass


def phi_third(eps: float, lam: float, c: float, phi, dphi, ddphi):
    """phi''' solved from the third-order equation obtained by differentiating
    phi phi' f' = eps lam phi^2 - 2 eps c + phi phi'' + 2 phi'^2 along f'' = eps lam + 3 phi''/phi."""
    num = (2 * dphi ** 4 - 2 * c * eps * (dphi ** 2 + phi * ddphi) + phi * dphi ** 2 * ddphi
           + eps * lam * phi ** 3 * ddphi + (phi * ddphi) ** 2)
    return num / (phi ** 2 * dphi)


def f_prime(eps: float, lam: float, c: float, phi, dphi, ddphi):
    """f' recovered algebraically from the first-order relation."""
    return (eps * lam * phi ** 2 - 2 * eps * c + phi * ddphi + 2 * dphi ** 2) / (phi * dphi)


@dataclass
class WarpedTrajectory:
    eps: int
    lam: float
    c: float
    f0: float                  # anchor value f(t0)
    t: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    dddphi: np.ndarray
    f: np.ndarray
    df: np.ndarray             # algebraic f'
    df_int: np.ndarray         # f' integrated along f'' = eps lam + 3 phi''/phi
    stop_reason: str | None = None

    @property
    def ddf(self) -> np.ndarray:
        return self.eps * self.lam + 3 * self.ddphi / self.phi

    @property
    def dddf(self) -> np.ndarray:
        return 3 * (self.dddphi * self.phi - self.ddphi * self.dphi) / self.phi ** 2

    @property
    def residual9(self) -> np.ndarray:
        """|integrated f' - algebraic f'|: the second-order equation in integrated form."""
        return np.abs(self.df_int - self.df)

    @property
    def residual10(self) -> np.ndarray:
        rhs = (self.eps * self.lam * self.phi ** 2 - 2 * self.eps * self.c
               + self.phi * self.ddphi + 2 * self.dphi ** 2)
        lhs = self.phi * self.dphi * self.df_int
        return np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "phi", "dphi", "ddphi", "f", "residual9", "residual10"])
            for row in zip(self.t, self.phi, self.dphi, self.ddphi, self.f, self.residual9, self.residual10):
                w.writerow([repr(float(x)) for x in row])


def integrate_phi(eps: int, lam: float, c: float, phi0: float, dphi0: float, ddphi0: float,
                  t0: float, t1: float, step: float) -> WarpedTrajectory:
    """Classic RK4 on (phi, phi', phi'', f') from t0 towards t1.

    f' is also recovered algebraically at every node; f accumulates the
    algebraic f' by the trapezoidal rule with Hermite end corrections, so
    that it stays consistent with f' and f'' to the interpolation order.
    The run stops early if phi < 1e-8 or |phi'| < 1e-8.
    """
    if eps not in (1, -1):
        raise WarpedDomainError("eps must be +1 or -1")
    if not phi0 > 0:
        raise WarpedDomainError("phi0 must be positive")
    if abs(dphi0) < SINGULAR_TOL:
        raise WarpedDomainError("phi0' must be nonzero to recover f'")
    if not step > 0:
        raise WarpedDomainError("step must be positive")
    if t1 == t0:
        raise WarpedDomainError("empty integration range")

    def rhs(y):
        p, dp, ddp, _ = y
        return np.array([dp, ddp, phi_third(eps, lam, c, p, dp, ddp), eps * lam + 3 * ddp / p])

    nsteps = int(np.ceil(abs(t1 - t0) / step - 1e-9))
    h = (t1 - t0) / nsteps
    y = np.array([phi0, dphi0, ddphi0, f_prime(eps, lam, c, phi0, dphi0, ddphi0)])
    ts, states = [t0], [y]
    reason = None
    # blow-up near the singular set is caught by the finiteness check
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(nsteps):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * h * k1)
            k3 = rhs(y + 0.5 * h * k2)
            k4 = rhs(y + h * k3)
            ynew = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            tnew = t0 + (k + 1) * h
            if not np.all(np.isfinite(ynew)):
                reason = f"non-finite state at t={tnew:.6g}"
                break
            if ynew[0] < SINGULAR_TOL:
                reason = f"phi < {SINGULAR_TOL:g} at t={tnew:.6g}"
                break
            if abs(ynew[1]) < SINGULAR_TOL:
                reason = f"|phi'| < {SINGULAR_TOL:g} at t={tnew:.6g}"
                break
            y = ynew
            ts.append(tnew)
            states.append(y)
    S = np.array(states)
    t = np.array(ts)
    p, dp, ddp, df_int = S.T
    traj = WarpedTrajectory(eps=eps, lam=float(lam), c=float(c), f0=0.0, t=t, phi=p, dphi=dp, ddphi=ddp,
                            dddphi=phi_third(eps, lam, c, p, dp, ddp), f=np.zeros_like(t),
                            df=f_prime(eps, lam, c, p, dp, ddp), df_int=df_int, stop_reason=reason)
    F, F1, F2 = traj.df, traj.ddf, traj.dddf
    dt = np.diff(t)
    inc = dt / 2 * (F[:-1] + F[1:]) + dt ** 2 / 10 * (F1[:-1] - F1[1:]) + dt ** 3 / 120 * (F2[:-1] + F2[1:])
    traj.f = np.concatenate([[0.0], np.cumsum(inc)])
    return traj


def _rk4_step(eps, lam, c, y, h):
    """One vectorized RK4 step of (phi, phi', phi'', f) with f' taken algebraically."""
    def rhs(y):
        p, dp, ddp, _ = y
        return np.array([dp, ddp, phi_third(eps, lam, c, p, dp, ddp), f_prime(eps, lam, c, p, dp, ddp)])

    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _taylor(eps, lam, c, state: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Taylor coefficients in t of phi and f through ``order``, from the ODE.

    Starting from (phi, phi', phi'') the third-order equation is applied to
    truncated series to extend phi one degree at a time; f' is the algebraic
    relation applied to the same series.
    """
    p0, dp0, ddp0, f0 = state
    a = [p0, dp0, ddp0 / 2.0]
    n = p0.shape[0]

    def shifted(k, deg):
        # series of the k-th derivative of phi, truncated at ``deg``
        out = []
        for j in range(deg + 1):
            m = 1
            for r in range(1, k + 1):
                m *= j + r
            out.append(m * a[j + k])
        return Jet(np.array(out).reshape(deg + 1, n), 1, deg)

    while len(a) < order + 2:
        deg = len(a) - 3
        g = phi_third(eps, lam, c, shifted(0, deg), shifted(1, deg), shifted(2, deg))
        k = deg + 3
        a.append(g.coeffs[deg] / (k * (k - 1) * (k - 2)))
    e = [f0]
    if order >= 1:
        deg = order - 1
        fp = f_prime(eps, lam, c, shifted(0, deg), shifted(1, deg), shifted(2, deg))
        e += [fp.coeffs[j] / (j + 1) for j in range(deg + 1)]
    return np.array(a[:order + 1]), np.array(e)


class TrajectoryField:
    """phi(t) or f(t) between trajectory nodes.

    Values come from one RK4 step off the nearest node, so they carry the
    integrator's accuracy.  Derivatives come from the ODE itself, which keeps
    all derivatives of phi and f mutually consistent at every sample.
    """

    def __init__(self, traj: "WarpedTrajectory", which: str, var: int = 0):
        if which not in ("phi", "f"):
            raise ValueError("which must be 'phi' or 'f'")
        if len(traj.t) < 3:
            raise WarpedDomainError("a trajectory field needs at least 3 nodes")
        self.traj = traj
        self.which = which
        self.var = var
        self.label = which
        self.domain = (float(min(traj.t[0], traj.t[-1])), float(max(traj.t[0], traj.t[-1])))

    def state(self, x: np.ndarray) -> np.ndarray:
        tr = self.traj
        idx = np.clip(np.rint((x - tr.t[0]) / (tr.t[1] - tr.t[0])).astype(int), 0, len(tr.t) - 1)
        y = np.array([tr.phi[idx], tr.dphi[idx], tr.ddphi[idx], tr.f[idx]])
        return _rk4_step(tr.eps, tr.lam, tr.c, y, x - tr.t[idx])

    def jet(self, points, order: int) -> Jet:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x = points[:, self.var]
        if np.any(x < self.domain[0]) or np.any(x > self.domain[1]):
            raise WarpedDomainError(f"{self.label}: sample outside the trajectory range {self.domain}")
        tr = self.traj
        a, e = _taylor(tr.eps, tr.lam, tr.c, self.state(x), order)
        coef = a if self.which == "phi" else e
        fact = np.array([math.factorial(m) for m in range(order + 1)])[:, None]
        var = Jet.variable(x, self.var, points.shape[1], order)
        return J.compose(var, list(coef * fact))

    def __call__(self, points) -> np.ndarray:
        return self.jet(points, 0).value

    def __repr__(self) -> str:
        return f"TrajectoryField({self.label})"


@dataclass
class FiberModel:
    """Conformal ball model of constant curvature c with diagonal signs."""

    c: float
    signs: tuple[int, int, int] = (1, 1, 1)
    metric: MetricField = field(init=False)

    def __post_init__(self):
        if sorted(self.signs, reverse=True) not in ([1, 1, 1], [1, 1, -1], [1, -1, -1]):
            raise ValueError("fiber signature must be (3,0), (2,1) or (1,2)")
        self.signs = tuple(int(s) for s in self.signs)
        self.sigma = self.conformal_factor()
        grid = [[0.0] * 3 for _ in range(3)]
        for i, s in enumerate(self.signs):
            grid[i][i] = parse(f"{s}/({to_string(self.sigma)})^2", FIBER_COORDS)
        label = {3: "riemannian", 1: "lorentzian"}.get(sum(self.signs), "other")
        self.metric = MetricField(FIBER_COORDS, grid, label)

    def conformal_factor(self, coords=FIBER_COORDS) -> Expr:
        quad = " + ".join(f"({s})*{y}^2" for s, y in zip(self.signs, coords))
        return parse(f"1 + ({self.c!r}/4)*({quad})", coords)

    def sigma_values(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return 1 + self.c / 4 * (y ** 2 * np.array(self.signs)).sum(axis=1)

    def sample(self, count: int, seed: int = 42, radius: float = 0.5) -> np.ndarray:
        """Points in the cube [-radius, radius]^3 where the conformal factor stays >= 0.25."""
        rng = np.random.default_rng(seed)
        out = np.empty((0, 3))
        while len(out) < count:
            y = rng.uniform(-radius, radius, (2 * count, 3))
            out = np.concatenate([out, y[self.sigma_values(y) >= 0.25]])
        return out[:count]

    def curvature_residual(self, points) -> float:
        """max |rho - 2c g| relative, which vanishes exactly for constant curvature c."""
        from .geometry import CurvatureStack
        st = CurvatureStack(self.metric, np.atleast_2d(points), 2)
        r = st.ricci - 2 * self.c * st.g
        return float(np.max(np.abs(r))) / max(1.0, float(np.max(np.abs(st.ricci))))


@dataclass
class WarpedSoliton:
    instance: SolitonInstance
    phi: TrajectoryField
    fiber: FiberModel
    traj: WarpedTrajectory

    def sample(self, count: int, seed: int = 42, margin: float = 0.05) -> np.ndarray:
        """Interior t values (clear of the ends by ``margin`` of the range) times fiber points."""
        rng = np.random.default_rng(seed)
        lo, hi = self.phi.domain
        pad = margin * (hi - lo)
        t = rng.uniform(lo + pad, hi - pad, count)
        y = self.fiber.sample(count, seed + 1)
        return np.column_stack([t, y])


def assemble_warped_metric(traj: WarpedTrajectory, fiber: FiberModel) -> WarpedSoliton:
    """eps dt^2 + phi(t)^2 g_N with phi and f read off the trajectory."""
    if abs(fiber.c - traj.c) > 1e-12 * max(1.0, abs(traj.c)):
        raise CurvatureMismatch(f"fiber curvature {fiber.c} differs from trajectory c = {traj.c}")
    phi = TrajectoryField(traj, "phi")
    fpot = TrajectoryField(traj, "f")
    sigma = fiber.conformal_factor(WARPED_COORDS[1:])
    # the fiber expression is parsed over the fiber names, reparse over the full chart
    sigma = parse(to_string(sigma), WARPED_COORDS)
    grid = [[0.0] * 4 for _ in range(4)]
    grid[0][0] = float(traj.eps)
    for i, s in enumerate(fiber.signs):
        grid[i + 1][i + 1] = Field(lambda P, S, s=s: (P * P) / (S * S) * float(s), phi, sigma, label=f"phi^2*g_N{i + 1}")
    signs = [traj.eps, *fiber.signs]
    label = {4: "riemannian", 2: "lorentzian", 0: "neutral"}.get(sum(signs), "other")
    if sum(signs) == -2:
        label = "lorentzian"
    metric = MetricField(WARPED_COORDS, grid, label)
    return WarpedSoliton(SolitonInstance(metric, fpot, traj.lam), phi, fiber, traj)


def plane_wave(a) -> SolitonInstance:
    """g = 2 du dv + a(u)(x1^2 + x2^2) du^2 + dx1^2 + dx2^2 with f'' = 2a, lambda = 0."""
    a_str = to_string(a) if isinstance(a, Expr) else str(a)
    a_expr = parse(a_str, PLANE_WAVE_COORDS)
    if a_expr.variables() - {"u"}:
        raise ValueError("the profile a must depend on u only")
    guu = parse(f"({a_str})*(x1^2 + x2^2)", PLANE_WAVE_COORDS)
    grid = [[guu, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0]]
    metric = MetricField(PLANE_WAVE_COORDS, grid, "lorentzian")
    f = PrimitiveField(parse(f"2*({a_str})", PLANE_WAVE_COORDS), 0, times=2, label=f"f[a={a_str}]")
    return SolitonInstance(metric, f, 0.0)
