"""Levi-Civita curvature stack."""
import numpy as np
import pytest

from grslab import geometry as G
from grslab.expr import parse
from grslab.geometry import CurvatureStack, DimensionError, MetricField, SingularMetricError

from gen import rel

NEUTRAL = [["1", "0", "0", "0"], ["0", "1", "0", "0"], ["0", "0", "-1", "0"], ["0", "0", "0", "-1"]]
C4 = ("x1", "x2", "x3", "x4")


def flat():
    return MetricField(C4, NEUTRAL, "neutral")


def quartic_metric(rng, scale=0.05):
    """diag(1,1,-1,-1) plus small random quartic polynomials."""
    mons = ["x1", "x2", "x3", "x4", "x1*x2", "x3^2", "x1*x4", "x2^2*x3", "x1^3*x4", "x2^4", "x1*x2*x3*x4"]
    comps = [[None] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(i, 4):
            terms = " + ".join(f"{rng.normal() * scale!r}*{m}" for m in rng.choice(mons, 4, replace=False))
            base = NEUTRAL[i][j]
            comps[i][j] = comps[j][i] = f"{base} + {terms}"
    return MetricField(C4, comps, "neutral")


def test_flat_metric_has_no_curvature(rng):
    pts = rng.uniform(-1, 1, size=(20, 4))
    st = CurvatureStack(flat(), pts, 3)
    for arr in (st.gamma, st.riemann, st.ricci, st.scalar, st.weyl, st.cotton):
        assert np.max(np.abs(arr)) == 0.0


def test_polar_plane_christoffels(rng):
    g = MetricField(("x1", "x2"), [["1", "0"], ["0", "x1^2"]], "riemannian")
    pts = rng.uniform(0.5, 2, size=(10, 2))
    gam, _ = G.christoffel(g, pts)
    x1 = pts[:, 0]
    ref = np.zeros((10, 2, 2, 2))
    ref[:, 0, 1, 1] = -x1
    ref[:, 1, 0, 1] = ref[:, 1, 1, 0] = 1 / x1
    assert np.max(np.abs(gam.array - ref)) < 1e-14
    assert np.max(np.abs(G.riemann(g, pts)[0].array)) < 1e-13


def test_round_sphere_ricci_equals_metric(rng):
    # stereographic unit sphere, Gauss curvature 1
    s = "4/(1 + x1^2 + x2^2)^2"
    g = MetricField(("x1", "x2"), [[s, "0"], ["0", s]], "riemannian")
    pts = rng.uniform(-1, 1, size=(30, 2))
    st = CurvatureStack(g, pts, 2)
    assert rel(st.ricci - st.g, st.g) < 1e-13
    assert np.max(np.abs(st.scalar - 2.0)) < 1e-12


def test_curvature_symmetries_and_first_bianchi(rng):
    g = quartic_metric(rng)
    pts = rng.uniform(-1, 1, size=(1000, 4))
    R = CurvatureStack(g, pts, 2).riemann
    assert rel(R + np.swapaxes(R, 1, 2), R) < 1e-12
    assert rel(R + np.swapaxes(R, 3, 4), R) < 1e-12
    assert rel(R - np.einsum("nijkl->nklij", R), R) < 1e-12
    cyc = R + np.einsum("nijkl->njkil", R) + np.einsum("nijkl->nkijl", R)
    assert rel(cyc, R) < 1e-10


def test_weyl_trace_free(rng):
    g = quartic_metric(rng)
    st = CurvatureStack(g, rng.uniform(-1, 1, size=(200, 4)), 2)
    W = st.weyl
    gi = st.ginv
    for a, b in ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)):
        sub = "".join("a" if i == a - 1 else "b" if i == b - 1 else c for i, c in enumerate("ijkl"))
        rest = "".join(c for i, c in enumerate("ijkl") if i not in (a - 1, b - 1))
        tr = np.einsum(f"nab,n{sub}->n{rest}", gi, W)
        assert rel(tr, W) < 1e-11


def _shifted(g, pts, h, order=2):
    """Stacks at pts +- h e_a for each coordinate a."""
    out = []
    for a in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[a] = h
        out.append((CurvatureStack(g, pts + e, order), CurvatureStack(g, pts - e, order)))
    return out


def test_cotton_is_minus_twice_weyl_divergence(rng):
    # finite-difference divergence oracle on random quartic metrics
    h = 1e-4
    for _ in range(3):
        g = quartic_metric(rng)
        pts = rng.uniform(-1, 1, size=(20, 4))
        st = CurvatureStack(g, pts, 3)
        W, Gm, gi = st.weyl, st.gamma, st.ginv
        dW = np.stack([(p.weyl - m.weyl) / (2 * h) for p, m in _shifted(g, pts, h)], axis=1)
        nW = (dW
              - np.einsum("nmax,nmyzv->naxyzv", Gm, W)
              - np.einsum("nmay,nxmzv->naxyzv", Gm, W)
              - np.einsum("nmaz,nxymv->naxyzv", Gm, W)
              - np.einsum("nmav,nxyzm->naxyzv", Gm, W))
        divW = np.einsum("nav,naxyzv->nxyz", gi, nW)
        assert rel(divW + 0.5 * st.cotton, st.cotton) < 1e-6
        assert rel(st.div_weyl + 0.5 * st.cotton, st.cotton) < 1e-11
        C = st.cotton
        assert rel(C + np.swapaxes(C, 1, 2), C) < 1e-12
        assert rel(np.einsum("nij,nijk->nk", gi, C), C) < 1e-10


def test_contracted_second_bianchi(rng):
    h = 1e-4
    g = quartic_metric(rng)
    pts = rng.uniform(-1, 1, size=(20, 4))
    st = CurvatureStack(g, pts, 3)
    rho, Gm, gi = st.ricci, st.gamma, st.ginv
    d = np.stack([(p.ricci - m.ricci) / (2 * h) for p, m in _shifted(g, pts, h)], axis=1)
    nabla = d - np.einsum("nmij,nmk->nijk", Gm, rho) - np.einsum("nmik,njm->nijk", Gm, rho)
    div = np.einsum("nij,nijk->nk", gi, nabla)
    dtau = np.stack([(p.scalar - m.scalar) / (2 * h) for p, m in _shifted(g, pts, h)], axis=1)
    assert rel(2 * div - dtau, dtau) < 1e-6
    assert rel(2 * st.div_ricci - st.dscalar, st.dscalar) < 1e-11


def test_gaussian_hessian_and_gradient(rng):
    g = flat()
    f = parse("(x1^2 + x2^2 - x3^2 - x4^2)/2", C4)
    pts = rng.uniform(-1, 1, size=(10, 4))
    hes = G.hessian(g, f, pts).array
    assert np.max(np.abs(hes - np.diag([1.0, 1, -1, -1]))) < 1e-15
    assert np.max(np.abs(G.gradient(g, f, pts) - pts)) < 1e-15


def test_hessian_against_finite_differences(rng):
    g = quartic_metric(rng)
    f = parse("exp(0.3*x1*x2) + x3^2*x4 - ln(2 + x1^2)", C4)
    pts = rng.uniform(-1, 1, size=(10, 4))
    st = CurvatureStack(g, pts, 1)
    h = 1e-4
    eye = np.eye(4) * h
    fd = np.empty((10, 4, 4))
    for i in range(4):
        for j in range(4):
            fd[:, i, j] = (f(pts + eye[i] + eye[j]) - f(pts + eye[i] - eye[j])
                           - f(pts - eye[i] + eye[j]) + f(pts - eye[i] - eye[j])) / (4 * h * h)
    df = np.stack([(f(pts + eye[k]) - f(pts - eye[k])) / (2 * h) for k in range(4)], axis=1)
    ref = fd - np.einsum("nkij,nk->nij", st.gamma, df)
    assert rel(st.hessian(f) - ref, ref) < 1e-6


def test_singular_metric_raises():
    g = MetricField(("x1", "x2"), [["x1", "0"], ["0", "1"]])
    with pytest.raises(SingularMetricError):
        G.ricci(g, (0.0, 1.0))


def test_dimension_errors():
    with pytest.raises(DimensionError):
        MetricField(("a", "b", "c", "d", "e"), [["1"] * 5] * 5)
    g3 = MetricField(("x1", "x2", "x3"), [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]])
    with pytest.raises(DimensionError):
        G.weyl(g3, (0.0, 0.0, 0.0))
    with pytest.raises(DimensionError):
        G.ricci(g3, (0.0, 0.0))


def test_asymmetric_grid_rejected():
    with pytest.raises(ValueError):
        MetricField(("x1", "x2"), [["1", "x1"], ["x2", "1"]])


def test_metric_at_inverse(rng):
    g = quartic_metric(rng)
    gm, gi, jet = G.metric_at(g, rng.uniform(-1, 1, size=4))
    assert np.max(np.abs(gm @ gi - np.eye(4))) < 1e-13
    assert jet.order == 3


def test_single_point_and_batch_agree(rng):
    g = quartic_metric(rng)
    pts = rng.uniform(-1, 1, size=(3, 4))
    batch = G.ricci(g, pts).array
    for i in range(3):
        assert np.allclose(G.ricci(g, pts[i]).array, batch[i], rtol=1e-13, atol=1e-14)
