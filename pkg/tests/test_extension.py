"""Deformed Riemannian extensions of surface connections."""
import numpy as np
import pytest

from grslab import affine as A
from grslab import extension as X
from grslab.affine import AffineConnection2D, AffineStack
from grslab.expr import parse
from grslab.extension import DeformationTensor, ExtensionChart
from grslab.geometry import CurvatureStack

from gen import BASE, poly2, random_connection, random_deformation, rel


def test_flat_pairing_metric(chart_points):
    st = CurvatureStack(X.build_extension(AffineConnection2D({})), chart_points[:50], 2)
    assert np.max(np.abs(st.riemann)) == 0.0
    assert np.allclose(st.g, [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]])


def test_component_structure(rng, chart_points):
    D = random_connection(rng)
    phi = random_deformation(rng)
    g = X.build_extension(D, phi)
    assert g.signature == "neutral"
    jt = g.jet(chart_points[:20], 3)
    gm = jt.value
    assert np.all(gm[:, 0, 2] == 1) and np.all(gm[:, 1, 3] == 1)
    assert np.all(gm[:, 0, 3] == 0) and np.all(gm[:, 2:, 2:] == 0)
    # affine in the fiber coordinates
    for a in ((0, 0, 2, 0), (0, 0, 1, 1), (0, 0, 0, 2)):
        assert np.max(np.abs(jt.partial(a))) < 1e-14


def test_type_a_components(chart_points):
    g = {"111": 0.7, "211": -0.3, "212": 0.4, "222": 1.1}
    m = X.build_extension(A.type_a(g)).jet(chart_points, 0).value
    y1, y2 = chart_points[:, 2], chart_points[:, 3]
    assert np.allclose(m[:, 0, 0], -2 * y1 * g["111"] - 2 * y2 * g["211"], rtol=0, atol=1e-15)


def test_deformation_only(rng, chart_points):
    phi = random_deformation(rng)
    ch = ExtensionChart(AffineConnection2D({}), phi)
    m = ch.metric.jet(chart_points, 0).value
    assert np.allclose(m[:, 0, 0], phi.phi11(chart_points[:, :2]))
    st = CurvatureStack(ch.metric, chart_points, 2)
    assert rel(st.scalar, st.riemann) < 1e-12
    assert rel(st.ricci, st.riemann) < 1e-12
    b = X.extension_battery(ch, chart_points)
    assert b["duality_min"] < 1e-9


def test_coordinate_mismatch():
    D = AffineConnection2D({"111": "u"}, coords=("u", "v"))
    with pytest.raises(X.CoordinateMismatch):
        X.build_extension(D)
    with pytest.raises(KeyError):
        DeformationTensor.from_strings({"21": "x1"})


def test_christoffel_closed_form(rng, chart_points):
    assert X.extension_christoffel_check(ExtensionChart(A.type_a({"111": 0.7, "211": -0.3, "212": 0.4})),
                                         chart_points) < 1e-12
    assert X.extension_christoffel_check(ExtensionChart(AffineConnection2D({})), chart_points) == 0.0
    for _ in range(3):
        ch = ExtensionChart(random_connection(rng), random_deformation(rng))
        assert X.extension_christoffel_check(ch, chart_points) < 1e-10


def test_fiber_symbols_of_pure_deformation(rng, chart_points):
    phi = random_deformation(rng)
    st = CurvatureStack(ExtensionChart(AffineConnection2D({}), phi).metric, chart_points[:50], 1)
    dphi = phi.jet(chart_points[:50, :2], 1).gradient()   # [n, j, k, i] = d_i Phi_jk
    ref = 0.5 * (np.einsum("njki->nkij", dphi) + np.einsum("nikj->nkij", dphi) - np.einsum("nijk->nkij", dphi))
    assert rel(st.gamma[:, 2:, :2, :2] - ref, ref) < 1e-13


def test_ricci_closed_form(rng, chart_points):
    for _ in range(3):
        ch = ExtensionChart(random_connection(rng), random_deformation(rng))
        assert X.extension_ricci_check(ch, chart_points) < 1e-10
    assert X.extension_ricci_check(ExtensionChart(AffineConnection2D({})), chart_points) == 0.0


def test_evaluation_map_and_pullback(rng, chart_points):
    iota = X.evaluation_map((1.0, 0.0))
    assert np.allclose(iota(chart_points), chart_points[:, 2])
    h = poly2(rng)
    assert np.allclose(X.pullback(h)(chart_points), h(chart_points[:, :2]))
    f = X.potential_general(("x1*x2", "x1"), h)
    ref = (chart_points[:, 2] * chart_points[:, 0] * chart_points[:, 1] + chart_points[:, 3] * chart_points[:, 0]
           + h(chart_points[:, :2]))
    assert np.allclose(f(chart_points), ref)
    ch = ExtensionChart(random_connection(rng), random_deformation(rng))
    st = CurvatureStack(ch.metric, chart_points, 1)
    assert np.max(np.abs(st.hessian(f)[:, 2:, 2:])) < 1e-12
    assert np.max(np.abs(st.gradnorm2(X.pullback(h)))) < 1e-12


def test_hessian_closed_forms(rng, chart_points):
    ch = ExtensionChart(random_connection(rng), random_deformation(rng))
    h = poly2(rng)
    assert X.hessian_closed_form_check(ch, h, chart_points) < 1e-12
    assert X.iota_hessian_check(ch, h, chart_points) < 1e-12


def test_extension_soliton_equivalence(rng, chart_points):
    s = A.typeA_soliton_solve({"111": 0.7, "211": -0.3, "212": 0.4, "222": 1.1})
    for _ in range(5):
        a, b = X.theorem2_equivalence(s.connection, random_deformation(rng), s.h, chart_points)
        assert a < 1e-10 and b < 1e-10
    bad = parse("x1^2 + x2", BASE)
    a, b = X.theorem2_equivalence(s.connection, random_deformation(rng), bad, chart_points)
    assert a > 1e-3 and abs(a - b) <= 1e-10 * max(1.0, a)
    a, b = X.theorem2_equivalence(A.type_a({"111": 0.5, "212": 0.5}), random_deformation(rng),
                                  parse("2", BASE), chart_points)
    assert a == 0.0 and b < 1e-12


def test_constant_symbol_constraints(rng, chart_points):
    D = AffineConnection2D({"111": 0.7, "212": 0.7})
    c = X.eq55_constraint_check(D, chart_points[:20])
    assert c.satisfied and c.lam == pytest.approx(0.7)
    st = CurvatureStack(ExtensionChart(D, random_deformation(rng)).metric, chart_points[:100], 2)
    assert np.max(np.abs(st.ricci)) < 1e-12
    c = X.eq55_constraint_check(AffineConnection2D({}), chart_points[:20])
    assert c.satisfied and c.lam == 0.0
    assert not X.eq55_constraint_check(random_connection(rng), chart_points[:20]).satisfied


def test_weyl_component_slopes(rng, base_points):
    for _ in range(3):
        ch = ExtensionChart(random_connection(rng), random_deformation(rng))
        r = X.weyl_slope_check(ch, base_points[:100])
        for key in ("w121p", "w122p", "slope1", "slope2"):
            assert r[key] < 1e-10, key


def test_curvature_operator_blocks(rng, chart_points):
    ch = ExtensionChart(random_connection(rng), random_deformation(rng))
    assert X.curvature_block_check(ch, chart_points) < 1e-10


def test_compatibility_condition(rng, chart_points):
    s = A.typeA_soliton_solve({"111": 0.7, "211": -0.3, "212": 0.4, "222": 1.1})
    ch = ExtensionChart(s.connection, random_deformation(rng))
    assert X.compatibility_residual(ch, s.h, chart_points) < 1e-7
    s = A.nonprojflat_example()
    assert X.compatibility_residual(ExtensionChart(s.connection), s.h, chart_points) < 1e-7


def test_case_ii_forces_constant_potential(base_points):
    for args in ((0.0, 1.0, 1.0), (1.2, -0.5, 2.0)):
        D = A.type_b(A.case_ii_gammas(*args))
        grad = X.solve_compatibility_gradient(D, base_points[:100])
        assert np.max(np.abs(grad)) < 1e-9


def test_invariant_battery(rng, chart_points):
    for _ in range(2):
        ch = ExtensionChart(random_connection(rng), random_deformation(rng))
        b = X.extension_battery(ch, chart_points)
        for key in ("scalar", "ric_nilpotent", "duality_min", "walker_isotropy", "walker_parallel", "degeneracy"):
            assert b[key] < 1e-9, key
        assert b["duality_side"] == "-"


def test_base_ricci_pulls_back(rng, chart_points):
    D = random_connection(rng)
    st = CurvatureStack(ExtensionChart(D).metric, chart_points[:50], 2)
    ref = 2 * AffineStack(D, chart_points[:50, :2], 1).ricci_sym
    assert rel(st.ricci[:, :2, :2] - ref, ref) < 1e-11
    assert np.max(np.abs(st.ricci[:, 2:, :])) < 1e-12
