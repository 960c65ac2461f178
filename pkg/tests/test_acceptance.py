"""Acceptance criteria AC1 to AC10.

Each test prints one line "ACn PASS|FAIL <measurements>" straight to the
terminal (capture is bypassed), then asserts.
"""
import json
import subprocess
import time

import numpy as np
import pytest

from grslab import affine as A
from grslab import catalog as C
from grslab import extension as X
from grslab import warped as W
from grslab.expr import to_string, parse
from grslab.extension import ExtensionChart
from grslab.geometry import CurvatureStack
from grslab.solitons import residual_from_stack

from gen import jet_fd_error, printable_ast, random_connection, random_deformation, rel, type_a_rank_one


@pytest.fixture
def verdict(capsys):
    def emit(tag, ok, detail):
        with capsys.disabled():
            print(f"\n{tag} {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def test_ac1_extension_battery(verdict, chart_points):
    rng = np.random.default_rng(101)
    keys = ("scalar", "ric_nilpotent", "walker_isotropy", "walker_parallel", "degeneracy", "duality_min")
    worst = dict.fromkeys(keys, 0.0)
    t0 = time.perf_counter()
    for _ in range(20):
        D = random_connection(rng)
        for _ in range(5):
            b = X.extension_battery(ExtensionChart(D, random_deformation(rng)), chart_points)
            for k in keys:
                worst[k] = max(worst[k], b[k])
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-9 and elapsed < 60
    verdict("AC1", ok, f"100 extensions x 1000 pts, worst {max(worst.values()):.2e} ({max(worst, key=worst.get)}), "
                       f"{elapsed:.1f}s")


def test_ac2_theorem_equivalence(verdict, chart_points):
    rng = np.random.default_rng(202)
    worst4, worstgap, worstnull = 0.0, 0.0, 0.0
    t0 = time.perf_counter()
    for _ in range(20):
        s = A.typeA_soliton_solve(type_a_rank_one(rng))
        for _ in range(5):
            phi = random_deformation(rng)
            aff, res4 = X.theorem2_equivalence(s.connection, phi, s.h, chart_points)
            worst4 = max(worst4, res4)
            worstgap = max(worstgap, abs(res4 - aff))
            st = CurvatureStack(ExtensionChart(s.connection, phi).metric, chart_points, 1)
            worstnull = max(worstnull, float(np.max(np.abs(st.gradnorm2(X.pullback(s.h))))))
    elapsed = time.perf_counter() - t0
    ok = worst4 < 1e-10 and worstgap < 1e-10 and worstnull < 1e-12 and elapsed < 30
    verdict("AC2", ok, f"4D residual {worst4:.2e}, |4D - affine| {worstgap:.2e}, |grad h|^2 {worstnull:.2e}, "
                       f"{elapsed:.1f}s")


def test_ac3_closed_forms(verdict, chart_points):
    rng = np.random.default_rng(303)
    worst = {"christoffel": 0.0, "ricci": 0.0, "hessian": 0.0}
    for _ in range(5):
        ch = ExtensionChart(random_connection(rng), random_deformation(rng))
        h = random_deformation(rng).phi11
        worst["christoffel"] = max(worst["christoffel"], X.extension_christoffel_check(ch, chart_points))
        worst["ricci"] = max(worst["ricci"], X.extension_ricci_check(ch, chart_points))
        worst["hessian"] = max(worst["hessian"], X.hessian_closed_form_check(ch, h, chart_points))
    ok = max(worst.values()) < 1e-10
    verdict("AC3", ok, ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + " on 1000 pts")


def test_ac4_soliton_identities_on_catalog(verdict):
    worst = {}
    for name in C.catalog_list():
        r = C.run_scenario(C.catalog_get(name), points=1000, seed=42)
        vals = [c.residual for c in r.checks if c.name.startswith("identity_")]
        if vals:
            worst[name] = max(vals)
    ok = bool(worst) and max(worst.values()) < 1e-8
    verdict("AC4", ok, f"{len(worst)} solitons, worst {max(worst.values()):.2e} ({max(worst, key=worst.get)})")


def test_ac5_homogeneous_examples(verdict, base_points):
    pts = base_points
    s = A.nonprojflat_example()
    soliton = A.affine_soliton_residual(s, pts).max_abs()
    _, sym = A.projective_flatness_test(s.connection, pts)
    rc = A.recurrence_check(s.connection, pts)
    omega_err = float(np.max(np.abs(rc.omega[:, 0] + 2 / pts[:, 0]) + np.abs(rc.omega[:, 1])))
    literal = -(2 / pts[:, 0]) * (1 + (-1.0))
    literal_err = float(np.max(np.abs(rc.omega[:, 0] - literal)))
    # the (1 + gamma^1_11) factor belongs to case (i) connections
    D = A.type_b({"111": 0.5, "211": 0.4, "212": 0.3})
    case_i_err = float(np.max(np.abs(A.recurrence_check(D, pts).omega[:, 0] + 2 * 1.5 / pts[:, 0])))

    res = A.rank2_resolve(1.0, 1.0, pts)
    tau = A.rho_metric_scalar(A.rank2_connection(1.0, 1.0, res.sign), pts[:200])
    tau_err = float(np.max(np.abs(tau - A.rank2_tau_formula(1.0, res.sign))))

    ok = (soliton < 1e-10 and sym > 1e-3 and rc.is_recurrent and omega_err < 1e-8 and case_i_err < 1e-8
          and res.residual < 1e-10 and tau_err < 1e-8)
    verdict("AC5", ok, f"nonprojflat residual {soliton:.2e}, nabla-rho asymmetry {sym:.2e}, "
                       f"omega vs -(2/x1)dx1 {omega_err:.2e}, case (i) formula {case_i_err:.2e}; "
                       f"FINDING: literal -(2/x1)(1+gamma^1_11) with gamma^1_11 = -1 gives 0, off by {literal_err:.2e}; "
                       f"rank2 sign {res.sign:+d} ({res.reading}) residual {res.residual:.2e}, tau {tau_err:.2e}")


def test_ac6_case_ii_trivial(verdict, base_points):
    s = C.catalog_get("typeB_case_ii_trivial")
    D = A.AffineConnection2D(s.payload["gamma"])
    worst = float(np.max(np.abs(X.solve_compatibility_gradient(D, base_points))))
    for args in ((0.0, 1.0, 1.0), (1.2, -0.5, 2.0), (-0.7, 0.3, -1.5)):
        grad = X.solve_compatibility_gradient(A.type_b(A.case_ii_gammas(*args)), base_points[:200])
        worst = max(worst, float(np.max(np.abs(grad))))
    verdict("AC6", worst < 1e-9, f"max |grad h| forced by the soliton equation {worst:.2e}")


def test_ac7_warped_branch(verdict):
    lam = 0.7
    tr = W.integrate_phi(1, lam, 1.0, 0.5, 1.0, 0.0, 0.5, 2.0, 1e-3)
    ws = W.assemble_warped_metric(tr, W.FiberModel(1.0))
    st = ws.instance.stack(ws.sample(1000, 42), 2)
    grs = rel(residual_from_stack(st, ws.instance.f, lam), st.ricci, st.g)
    weyl = rel(st.weyl, st.riemann, st.g)

    r = [float(np.max(W.integrate_phi(1, 0.8, 0.6, 1.0, 0.5, 0.2, 0.0, 1.0, h).residual9))
         for h in (0.05, 0.025, 0.0125)]
    ratios = [a / b for a, b in zip(r, r[1:])]

    rng = np.random.default_rng(5)
    worst9, accepted, tried = 0.0, 0, 0
    while accepted < 25:
        tried += 1
        eps = int(rng.choice([1, -1]))
        lam_r, c = rng.uniform(-1, 1, size=2)
        tr = W.integrate_phi(eps, lam_r, c, rng.uniform(0.5, 2), rng.choice([1, -1]) * rng.uniform(0.3, 1.5),
                             rng.uniform(-0.5, 0.5), 0.0, 1.0, 1e-3)
        if tr.stop_reason is None and tr.phi.min() >= 0.1 and np.abs(tr.dphi).min() >= 0.05:
            accepted += 1
            worst9 = max(worst9, float(np.max(tr.residual9)))
    ok = grs < 1e-6 and weyl < 1e-6 and all(12 <= q <= 20 for q in ratios) and worst9 < 1e-6
    verdict("AC7", ok, f"cone grs {grs:.2e}, W {weyl:.2e}; step-halving ratios "
                       f"{', '.join(f'{q:.1f}' for q in ratios)}; residual9 {worst9:.2e} over {accepted} admissible "
                       f"of {tried} random trajectories")


def test_ac8_plane_waves(verdict):
    pts = np.random.default_rng(8).uniform(0.1, 2, (1000, 4))
    worst = 0.0
    for a in ("1", "u", "u^2"):
        s = W.plane_wave(a)
        st = s.stack(pts, 2)
        worst = max(worst, rel(residual_from_stack(st, s.f, 0.0), st.ricci), rel(st.weyl, st.riemann))
    verdict("AC8", worst < 1e-9, f"a in {{1, u, u^2}}: worst grs/Weyl residual {worst:.2e}")


def test_ac9_differentiation_substrate(verdict):
    fd = jet_fd_error(np.random.default_rng(9), 100)
    rng = np.random.default_rng(99)
    coords = ("x1", "x2", "x1'", "x2'")
    trees = [printable_ast(rng, coords) for _ in range(200)]
    same = sum(parse(to_string(e), coords) == e for e in trees)
    verdict("AC9", fd < 1e-6 and same == 200, f"jet vs central difference {fd:.2e} over 100 expressions; "
                                             f"round trip {same}/200")


def test_ac10_determinism(verdict, tmp_path):
    docs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        p = subprocess.run(["grslab", "catalog", "run", "all", "--seed", "42", "--json", "out.json"],
                           cwd=d, capture_output=True, text=True)
        doc = json.loads((d / "out.json").read_text())
        for rep in doc["reports"]:
            rep.pop("wall_time")
        docs.append((p.returncode, doc))
    ok = docs[0] == docs[1] and docs[0][0] == 0
    verdict("AC10", ok, f"two runs identical without wall_time: {docs[0] == docs[1]}, exit {docs[0][0]}")
