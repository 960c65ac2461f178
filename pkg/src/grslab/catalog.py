"""Named scenarios, strict scenario files, and check reports."""
from __future__ import annotations

import copy
import json
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import affine as A
from . import extension as X
from .expr import field_jet, parse
from .geometry import CurvatureStack, MetricField
from .sampling import default_box, sample_points
from .solitons import (SolitonInstance, eigenstructure_from_stack, soliton_identities_from_stack,
                       residual_from_stack)
from . import warped as W

KINDS = ("extension", "metric", "affine", "warped", "plane_wave")
SCHEMA_KEYS = {"name", "kind", "gamma", "phi", "metric", "h", "f", "lambda", "expect", "sampling", "params"}
REQUIRED_KEYS = {"name", "kind", "lambda", "expect"}
DEFAULT_POINTS = 1000
DEFAULT_SEED = 42


class ScenarioError(ValueError):
    """Malformed scenario: unknown keys, wrong types, unknown check names."""


@dataclass(frozen=True)
class CheckSpec:
    anchor: str
    tol: float
    mode: str = "le"            # "le": pass iff residual <= tol; "gt": pass iff residual > tol
    overridable: bool = True    # whether a global --tol replaces the default


CHECKS: dict[str, CheckSpec] = {
    # affine surface
    "affine_soliton": CheckSpec("Hes^D_h + 2 rho^D_sym = 0", 1e-10),
    "ricci_symmetric": CheckSpec("Ricci tensor symmetric", 1e-10),
    "projectively_flat": CheckSpec("rho^D symmetric and (D_x rho)(y,z) = (D_y rho)(x,z)", 1e-9),
    "ricci_rank": CheckSpec("rank of the Ricci tensor", 0.0, overridable=False),
    "ricci_recurrent": CheckSpec("D rho = omega (x) rho", 1e-8),
    "recurrence_form": CheckSpec("recurrent with the stated omega", 1e-8),
    "ricci_parallel": CheckSpec("locally symmetric: D rho^D = 0", 1e-10),
    "parallel_kernel": CheckSpec("symmetric of rank one and has parallel kernel", 1e-9),
    "potential_constant": CheckSpec("result in trivial affine gradient Ricci solitons", 1e-9),
    "soliton_nontrivial": CheckSpec("non-trivial affine gradient Ricci soliton", 1e-9, "gt"),
    "sign_resolution": CheckSpec("nested signs resolved by residual minimisation", 1e-10),
    "rho_metric_tau": CheckSpec("rho^D defines a metric of constant scalar curvature", 1e-8),
    # four-dimensional soliton
    "grs_residual": CheckSpec("Hes_f + rho = lambda g", 1e-9),
    "gradient_null": CheckSpec("grad f is null", 1e-12),
    "identity_dtau": CheckSpec("d tau = 2 rho(grad f, .)", 1e-8),
    "identity_constant": CheckSpec("tau + |grad f|^2 - 2 lambda f is constant", 1e-8),
    "identity_curvature": CheckSpec("R(x,y,z,grad f) = (nabla_y rho)(x,z) - (nabla_x rho)(y,z)", 1e-8),
    "weyl_zero": CheckSpec("locally conformally flat", 1e-9),
    # deformed Riemannian extension
    "theorem2_equivalence": CheckSpec("4D residual equals the affine residual", 1e-10),
    "scalar_zero": CheckSpec("tau = 0", 1e-9),
    "ric_nilpotent": CheckSpec("Ric o Ric = 0", 1e-9),
    "self_dual": CheckSpec("one duality half of W vanishes", 1e-9),
    "walker_isotropic": CheckSpec("ker pi_* is totally isotropic", 1e-9),
    "walker_parallel": CheckSpec("ker pi_* is parallel", 1e-9),
    "fiber_degenerate": CheckSpec("R(x, ker pi_*) ker pi_* = 0", 1e-9),
    "christoffel_closed_form": CheckSpec("displayed Christoffel symbols of g_{D,Phi}", 1e-10),
    "ricci_closed_form": CheckSpec("displayed Ricci components of g_{D,Phi}", 1e-10),
    "curvature_blocks": CheckSpec("block form of the curvature operator", 1e-10),
    # warped branch
    "residual9": CheckSpec("f'' = eps lambda + 3 phi''/phi", 1e-6),
    "residual10": CheckSpec("phi phi' f' = eps lambda phi^2 - 2 eps c + phi phi'' + 2 phi'^2", 1e-6),
    "fiber_curvature": CheckSpec("N has constant sectional curvature c", 1e-8),
    "eigenstructure": CheckSpec("grad f is an eigenvector and Ric is umbilic on its complement", 1e-4),
}

SOLITON_4D = ("grs_residual", "gradient_null", "identity_dtau", "identity_constant", "identity_curvature")
AFFINE_CHECKS = ("affine_soliton", "ricci_symmetric", "projectively_flat", "ricci_rank", "ricci_recurrent",
                 "recurrence_form", "ricci_parallel", "parallel_kernel", "potential_constant",
                 "soliton_nontrivial", "sign_resolution", "rho_metric_tau", "theorem2_equivalence") + SOLITON_4D
BATTERY = ("scalar_zero", "ric_nilpotent", "self_dual", "walker_isotropic", "walker_parallel", "fiber_degenerate",
           "christoffel_closed_form", "ricci_closed_form", "curvature_blocks", "weyl_zero")
KIND_CHECKS = {
    "affine": AFFINE_CHECKS,
    "extension": AFFINE_CHECKS + BATTERY,
    "metric": SOLITON_4D + ("weyl_zero",),
    "plane_wave": SOLITON_4D + ("weyl_zero",),
    "warped": ("residual9", "residual10", "fiber_curvature", "eigenstructure", "weyl_zero") + SOLITON_4D,
}
# interpolation-limited defaults for assembled warped metrics
KIND_TOLS = {"warped": {"grs_residual": 1e-5, "weyl_zero": 1e-5, "identity_dtau": 1e-4,
                        "identity_constant": 1e-4, "identity_curvature": 1e-4}}


@dataclass
class Scenario:
    name: str
    kind: str
    payload: dict
    expect: list[tuple[str, bool]]
    sampling: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    @property
    def lam(self) -> float:
        return float(self.payload.get("lambda", 0.0))

    @property
    def params(self) -> dict:
        return self.payload.get("params", {})

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        out.update(copy.deepcopy(self.payload))
        out["expect"] = [{"check": c, "pass": p} for c, p in self.expect]
        if self.sampling:
            out["sampling"] = copy.deepcopy(self.sampling)
        return out


@dataclass
class CheckRecord:
    name: str
    anchor: str
    residual: float | None
    tol: float
    passed: bool
    expected: bool
    error: str | None = None

    @property
    def matched(self) -> bool:
        return self.error is None and self.passed == self.expected

    def to_dict(self) -> dict:
        out = {"name": self.name, "anchor": self.anchor, "residual": self.residual, "tol": self.tol,
               "pass": self.passed, "expected": self.expected, "matched": self.matched}
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class Report:
    scenario: str
    checks: list[CheckRecord]
    samples: int
    wall_time: float
    error: str | None = None

    @property
    def errored(self) -> bool:
        return self.error is not None or any(c.error is not None for c in self.checks)

    @property
    def passed(self) -> bool:
        return not self.errored and all(c.matched for c in self.checks)

    def to_dict(self) -> dict:
        out = {"scenario": self.scenario, "checks": [c.to_dict() for c in self.checks], "pass": self.passed,
               "errored": self.errored, "samples": self.samples, "wall_time": self.wall_time}
        if self.error is not None:
            out["error"] = self.error
        return out


# ----------------------------------------------------------------------------
# validation

def _expr_or_number(v, where: str):
    if isinstance(v, bool) or not isinstance(v, (str, int, float)):
        raise ScenarioError(f"{where}: expected an expression string or a number")


def scenario_from_dict(d: dict) -> Scenario:
    """Strict conversion of a scenario document; unknown keys are rejected."""
    if not isinstance(d, dict):
        raise ScenarioError("a scenario must be a JSON object")
    unknown = set(d) - SCHEMA_KEYS
    if unknown:
        raise ScenarioError(f"unknown keys {sorted(unknown)}")
    missing = REQUIRED_KEYS - set(d)
    if missing:
        raise ScenarioError(f"missing keys {sorted(missing)}")
    if not isinstance(d["name"], str) or not d["name"]:
        raise ScenarioError("name must be a non-empty string")
    kind = d["kind"]
    if kind not in KINDS:
        raise ScenarioError(f"kind must be one of {KINDS}, got {kind!r}")
    lam = d["lambda"]
    if isinstance(lam, bool) or not isinstance(lam, (int, float)):
        raise ScenarioError("lambda must be a number")
    if "h" in d and "f" in d:
        raise ScenarioError("give at most one of 'h' and 'f'")
    if "gamma" in d:
        if not isinstance(d["gamma"], dict):
            raise ScenarioError("gamma must be an object")
        bad = set(d["gamma"]) - set(A.GAMMA_KEYS)
        if bad:
            raise ScenarioError(f"unknown gamma keys {sorted(bad)}; allowed {A.GAMMA_KEYS}")
        for k, v in d["gamma"].items():
            _expr_or_number(v, f"gamma[{k}]")
    if "phi" in d:
        if not isinstance(d["phi"], dict):
            raise ScenarioError("phi must be an object")
        bad = set(d["phi"]) - set(X.PHI_KEYS)
        if bad:
            raise ScenarioError(f"unknown phi keys {sorted(bad)}; allowed {X.PHI_KEYS}")
        for k, v in d["phi"].items():
            _expr_or_number(v, f"phi[{k}]")
    if "metric" in d:
        m = d["metric"]
        if not (isinstance(m, list) and m and all(isinstance(r, list) and len(r) == len(m) for r in m)):
            raise ScenarioError("metric must be a square list of lists")
        for r in m:
            for v in r:
                _expr_or_number(v, "metric entry")
    for key in ("h", "f"):
        if key in d:
            _expr_or_number(d[key], key)
    if kind in ("affine", "extension") and "gamma" not in d:
        raise ScenarioError(f"kind {kind!r} needs 'gamma'")
    if kind == "metric" and ("metric" not in d or "f" not in d):
        raise ScenarioError("kind 'metric' needs 'metric' and 'f'")
    params = d.get("params", {})
    if not isinstance(params, dict):
        raise ScenarioError("params must be an object")
    tolerances = params.get("tolerances", {})
    if not isinstance(tolerances, dict) or any(k not in CHECKS for k in tolerances):
        raise ScenarioError("params.tolerances must map known check names to numbers")
    if not isinstance(d["expect"], list):
        raise ScenarioError("expect must be a list")
    expect = []
    allowed = KIND_CHECKS[kind]
    for item in d["expect"]:
        if not isinstance(item, dict) or set(item) != {"check", "pass"} or not isinstance(item["pass"], bool):
            raise ScenarioError('each expect entry must be {"check": str, "pass": bool}')
        if item["check"] not in allowed:
            raise ScenarioError(f"check {item['check']!r} is not known for kind {kind!r}")
        expect.append((item["check"], item["pass"]))
    sampling = d.get("sampling", {})
    if not isinstance(sampling, dict) or set(sampling) - {"box", "points", "seed"}:
        raise ScenarioError("sampling may only contain box, points and seed")
    payload = {k: copy.deepcopy(d[k]) for k in d if k not in ("name", "kind", "expect", "sampling")}
    return Scenario(d["name"], kind, payload, expect, copy.deepcopy(sampling), dict(tolerances))


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from exc
    return scenario_from_dict(doc)


# ----------------------------------------------------------------------------
# the catalog

_PHI_DEMO = {"11": "x1*x2", "12": "0.3", "22": "x2^2"}
_IDENTITIES = ["identity_dtau", "identity_constant", "identity_curvature"]
_LIFT = ["grs_residual", "gradient_null", "theorem2_equivalence"] + _IDENTITIES
_BATTERY = ["scalar_zero", "ric_nilpotent", "self_dual", "walker_isotropic", "walker_parallel",
            "fiber_degenerate", "christoffel_closed_form", "ricci_closed_form", "curvature_blocks"]


def _expect(passing, failing=()):
    return [{"check": c, "pass": True} for c in passing] + [{"check": c, "pass": False} for c in failing]


_CATALOG: dict[str, dict] = {
    "typeA_rank1": {
        "kind": "extension",
        "gamma": {"111": "1", "211": "1", "212": "2", "222": "0.5"},
        "phi": _PHI_DEMO, "h": "-3*x1", "lambda": 0.0, "params": {"rank": 1},
        "expect": _expect(["affine_soliton", "ricci_symmetric", "projectively_flat", "ricci_rank",
                           "parallel_kernel", "soliton_nontrivial"] + _LIFT + _BATTERY),
    },
    "typeA_locally_symmetric": {
        "kind": "extension",
        "gamma": {"211": "1", "212": "1", "222": "0.5"},
        "phi": _PHI_DEMO, "h": "0.5*x1^2", "lambda": 0.0, "params": {"rank": 1},
        "expect": _expect(["affine_soliton", "ricci_parallel", "projectively_flat", "ricci_rank",
                           "soliton_nontrivial"] + _LIFT + _BATTERY),
    },
    "typeB_case_i": {
        "kind": "extension",
        "gamma": {"111": "1/x1", "211": "0.5/x1", "212": "0.5/x1"},
        "phi": _PHI_DEMO, "h": "0.75*ln(x1)", "lambda": 0.0,
        "params": {"rank": 1, "omega": ["-4/x1", "0"]},
        "expect": _expect(["affine_soliton", "projectively_flat", "ricci_rank", "ricci_recurrent",
                           "recurrence_form", "soliton_nontrivial"] + _LIFT + _BATTERY),
    },
    "typeB_case_ii_trivial": {
        "kind": "affine",
        "gamma": {"111": "-2/x1", "112": "1/x1", "122": "1/x1", "211": "-2/x1", "212": "-3/x1", "222": "-1/x1"},
        "lambda": 0.0, "params": {"rank": 1},
        "expect": _expect(["projectively_flat", "ricci_symmetric", "ricci_rank", "potential_constant"],
                          ["soliton_nontrivial"]),
    },
    "typeB_nonprojflat": {
        "kind": "extension",
        "gamma": {"111": "-1/x1", "122": "1/x1"},
        "phi": _PHI_DEMO, "h": "-4*ln(x1) + x2", "lambda": 0.0,
        "params": {"rank": 1, "omega": ["-2/x1", "0"]},
        "expect": _expect(["affine_soliton", "ricci_symmetric", "ricci_rank", "ricci_recurrent",
                           "recurrence_form", "soliton_nontrivial"] + _LIFT + _BATTERY,
                          ["projectively_flat"]),
    },
    "rank2_homogeneous": {
        "kind": "affine",
        "gamma": {"111": "(1 + sqrt(3))/x1", "212": "1/x1", "122": "1/x1"},
        "phi": _PHI_DEMO, "h": "-2*(1 - sqrt(3))*ln(x1 + sqrt(3)*x1)", "lambda": 0.0,
        "params": {"rank": 2, "rank2": {"g212": 1.0, "g122": 1.0, "kappa": 0.0}},
        "expect": _expect(["affine_soliton", "ricci_symmetric", "ricci_rank", "sign_resolution",
                           "rho_metric_tau", "soliton_nontrivial"] + _LIFT,
                          ["projectively_flat"]),
    },
    "opozda_parallel_kernel": {
        "kind": "extension",
        "gamma": {"112": "0.5", "122": "2*exp(0.5*x1*exp(0.5*x2) - 0.5*x2) + 1 + 0.25*x1"},
        "phi": _PHI_DEMO, "h": "4*(exp(0.5*x2) - 1 - 0.5*x2) + x1*exp(0.5*x2)", "lambda": 0.0,
        "params": {"rank": 1},
        "expect": _expect(["affine_soliton", "ricci_symmetric", "ricci_rank", "parallel_kernel",
                           "soliton_nontrivial"] + _LIFT + _BATTERY,
                          ["projectively_flat"]),
    },
    "plane_wave_lcf": {
        "kind": "plane_wave", "lambda": 0.0, "params": {"a": "u^2"},
        "expect": _expect(["grs_residual", "weyl_zero", "gradient_null"] + _IDENTITIES),
    },
    "gaussian_flat": {
        "kind": "metric",
        "metric": [["1", "0", "0", "0"], ["0", "1", "0", "0"], ["0", "0", "-1", "0"], ["0", "0", "0", "-1"]],
        "f": "0.5*(x1^2 + x2^2 - x3^2 - x4^2)", "lambda": 1.0,
        "expect": _expect(["grs_residual", "weyl_zero"] + _IDENTITIES, ["gradient_null"]),
    },
    "warped_cone": {
        "kind": "warped", "lambda": 0.7,
        "params": {"eps": 1, "c": 1.0, "phi0": 0.5, "dphi0": 1.0, "ddphi0": 0.0, "t0": 0.5, "t1": 2.0,
                   "step": 1e-3, "fiber_signs": [1, -1, -1]},
        "expect": _expect(["residual9", "residual10", "fiber_curvature", "grs_residual", "weyl_zero",
                           "eigenstructure"] + _IDENTITIES),
    },
}


def catalog_list() -> list[str]:
    return sorted(_CATALOG)


def catalog_get(name: str) -> Scenario:
    if name not in _CATALOG:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(catalog_list())}")
    return scenario_from_dict({"name": name, **copy.deepcopy(_CATALOG[name])})


# ----------------------------------------------------------------------------
# running

def _rel(r, *scales) -> float:
    r = np.asarray(r, dtype=float)
    s = max([1.0] + [float(np.max(np.abs(x))) for x in scales if np.size(x)])
    return float(np.max(np.abs(r))) / s if r.size else 0.0


class _Context:
    """Lazily built objects shared by the checks of one scenario."""

    def __init__(self, s: Scenario, points: int, seed: int):
        self.s = s
        self.n = points
        self.seed = seed
        self.p = s.payload
        self.params = s.params

    # sampling

    @cached_property
    def points(self) -> np.ndarray:
        kind = self.s.kind
        if kind == "warped":
            return self.warped.sample(self.n, self.seed)
        dim = {"metric": len(self.p.get("metric", [])), "plane_wave": 4}.get(kind, 4)
        box = self.s.sampling.get("box") or default_box("extension" if kind in ("affine", "extension") else kind, dim)
        if len(box) != dim:
            raise ScenarioError(f"sampling box has {len(box)} ranges, chart has {dim} coordinates")
        return sample_points(box, self.n, self.seed)

    @property
    def base(self) -> np.ndarray:
        return self.points[:, :2]

    # affine / extension

    @cached_property
    def D(self) -> A.AffineConnection2D:
        return A.AffineConnection2D({k: (v if isinstance(v, str) else float(v)) for k, v in self.p["gamma"].items()})

    @cached_property
    def h(self):
        if "h" not in self.p:
            raise ScenarioError("this check needs a potential 'h'")
        return parse(str(self.p["h"]), A.COORDS)

    @cached_property
    def phi(self) -> X.DeformationTensor:
        return X.DeformationTensor.from_strings({k: str(v) for k, v in self.p.get("phi", {}).items()})

    @cached_property
    def chart(self) -> X.ExtensionChart:
        return X.ExtensionChart(self.D, self.phi)

    @cached_property
    def astack(self) -> A.AffineStack:
        return A.AffineStack(self.D, self.base, 2)

    @cached_property
    def compat_gradient(self) -> np.ndarray:
        return np.asarray(X.solve_compatibility_gradient(self.D, self.base))

    @cached_property
    def rank2(self) -> A.SignResolution:
        cfg = self._param("rank2")
        return A.rank2_resolve(float(cfg["g212"]), float(cfg["g122"]), self.base, float(cfg.get("kappa", 0.0)))

    # four-dimensional soliton

    @cached_property
    def warped(self) -> W.WarpedSoliton:
        q = self.params
        try:
            traj = W.integrate_phi(int(q["eps"]), self.s.lam, float(q["c"]), float(q["phi0"]), float(q["dphi0"]),
                                   float(q["ddphi0"]), float(q["t0"]), float(q["t1"]), float(q["step"]))
        except KeyError as exc:
            raise ScenarioError(f"warped scenarios need params.{exc.args[0]}") from None
        return W.assemble_warped_metric(traj, W.FiberModel(float(q["c"]), tuple(q.get("fiber_signs", (1, 1, 1)))))

    @cached_property
    def soliton(self) -> SolitonInstance:
        kind = self.s.kind
        if kind in ("affine", "extension"):
            return SolitonInstance(self.chart.metric, X.pullback(self.h), self.s.lam)
        if kind == "plane_wave":
            return W.plane_wave(str(self._param("a")))
        if kind == "warped":
            return self.warped.instance
        m = self.p["metric"]
        coords = self.params.get("coords") or [f"x{i + 1}" for i in range(len(m))]
        metric = MetricField(coords, [[str(v) for v in row] for row in m])
        return SolitonInstance(metric, str(self.p["f"]), self.s.lam)

    @cached_property
    def stack(self) -> CurvatureStack:
        return self.soliton.stack(self.points, 3)

    @cached_property
    def identities(self) -> tuple[float, float, float]:
        return soliton_identities_from_stack(self.stack, self.soliton.f, self.soliton.lam)

    @cached_property
    def battery(self) -> dict:
        return X.extension_battery(self.chart, self.points)

    def _param(self, key):
        if key not in self.params:
            raise ScenarioError(f"this check needs params.{key}")
        return self.params[key]


def _c_affine_soliton(c: _Context) -> float:
    return _rel(c.astack.soliton_residual(c.h), 2 * c.astack.ricci_sym)


def _c_projectively_flat(c: _Context) -> float:
    st = c.astack
    nr = st.nabla_ricci
    return max(_rel(st.ricci_ant, st.ricci), _rel(nr - np.swapaxes(nr, -3, -2), nr))


def _c_recurrence_form(c: _Context) -> float:
    exprs = c._param("omega")
    if not isinstance(exprs, list) or len(exprs) != 2:
        raise ScenarioError("params.omega must be a list of two expressions")
    ref = np.column_stack([parse(str(e), A.COORDS)(c.base) * np.ones(len(c.base)) for e in exprs])
    got = A.recurrence_check(c.D, c.base).omega
    return _rel(got - ref, ref)


def _c_sign_resolution(c: _Context) -> float:
    r = c.rank2
    cfg = c._param("rank2")
    ref = A.AffineStack(A.rank2_connection(float(cfg["g212"]), float(cfg["g122"]), r.sign), c.base, 0).gamma
    mismatch = _rel(c.astack.gamma - ref, ref)
    return max(r.residual / max(1.0, float(np.max(np.abs(c.astack.ricci)))), mismatch)


def _c_rho_metric_tau(c: _Context) -> float:
    cfg = c._param("rank2")
    tau = A.rho_metric_scalar(c.D, c.base)
    ref = A.rank2_tau_formula(float(cfg["g212"]), c.rank2.sign)
    return _rel(tau - ref, ref)


def _c_soliton_nontrivial(c: _Context) -> float:
    if "h" in c.p:
        return float(np.max(np.abs(field_jet(c.h, c.base, 1).gradient())))
    return float(np.max(np.abs(c.compat_gradient)))


def _c_grs(c: _Context) -> float:
    st, s = c.stack, c.soliton
    return _rel(residual_from_stack(st, s.f, s.lam), st.hessian(s.f), st.ricci, s.lam * st.g)


def _c_gradient_null(c: _Context) -> float:
    st = c.stack
    df = st.gradient_form(c.soliton.f)
    return _rel(st.gradnorm2(c.soliton.f), df ** 2)


def _c_weyl(c: _Context) -> float:
    return _rel(c.stack.weyl, c.stack.riemann)


def _c_theorem2(c: _Context) -> float:
    a, b = X.theorem2_equivalence(c.D, c.phi, c.h, c.points)
    return abs(a - b) / max(1.0, float(np.max(np.abs(c.astack.ricci))))


def _c_eigen(c: _Context) -> float:
    e = eigenstructure_from_stack(c.stack, c.soliton.f)
    return max(e.cross, e.offdiag, e.spread)


def _c_fiber(c: _Context) -> float:
    fib = c.warped.fiber
    return fib.curvature_residual(fib.sample(min(c.n, 200), c.seed))


def _c_residual9(c: _Context) -> float:
    tr = c.warped.traj
    return _rel(tr.residual9, tr.df)


_RUNNERS: dict[str, Callable[[_Context], float]] = {
    "affine_soliton": _c_affine_soliton,
    "ricci_symmetric": lambda c: _rel(c.astack.ricci_ant, c.astack.ricci),
    "projectively_flat": _c_projectively_flat,
    "ricci_rank": lambda c: float(abs(A.ricci_rank(c.D, c.base) - int(c._param("rank")))),
    "ricci_recurrent": lambda c: A.recurrence_check(c.D, c.base).residual,
    "recurrence_form": _c_recurrence_form,
    "ricci_parallel": lambda c: _rel(c.astack.nabla_ricci, c.astack.ricci),
    "parallel_kernel": lambda c: A.ricci_kernel_parallel(c.D, c.base),
    "potential_constant": lambda c: float(np.max(np.abs(c.compat_gradient))),
    "soliton_nontrivial": _c_soliton_nontrivial,
    "sign_resolution": _c_sign_resolution,
    "rho_metric_tau": _c_rho_metric_tau,
    "grs_residual": _c_grs,
    "gradient_null": _c_gradient_null,
    "identity_dtau": lambda c: c.identities[0],
    "identity_constant": lambda c: c.identities[1],
    "identity_curvature": lambda c: c.identities[2],
    "weyl_zero": _c_weyl,
    "theorem2_equivalence": _c_theorem2,
    "scalar_zero": lambda c: c.battery["scalar"],
    "ric_nilpotent": lambda c: c.battery["ric_nilpotent"],
    "self_dual": lambda c: c.battery["duality_min"],
    "walker_isotropic": lambda c: c.battery["walker_isotropy"],
    "walker_parallel": lambda c: c.battery["walker_parallel"],
    "fiber_degenerate": lambda c: c.battery["degeneracy"],
    "christoffel_closed_form": lambda c: X.extension_christoffel_check(c.chart, c.points),
    "ricci_closed_form": lambda c: X.extension_ricci_check(c.chart, c.points),
    "curvature_blocks": lambda c: X.curvature_block_check(c.chart, c.points, c.seed),
    "residual9": _c_residual9,
    "residual10": lambda c: float(np.max(c.warped.traj.residual10)),
    "fiber_curvature": _c_fiber,
    "eigenstructure": _c_eigen,
}

_DOMAIN_ERRORS = (ArithmeticError, ValueError, KeyError)


def check_tolerance(s: Scenario, name: str, tol_override: float | None = None) -> float:
    spec = CHECKS[name]
    if name in s.tolerances:
        return float(s.tolerances[name])
    if tol_override is not None and spec.overridable:
        return float(tol_override)
    return KIND_TOLS.get(s.kind, {}).get(name, spec.tol)


def run_scenario(s: Scenario, points: int | None = None, seed: int | None = None,
                 tol: float | None = None) -> Report:
    """Run the expected checks of a scenario (all checks of its kind if none are listed)."""
    start = time.perf_counter()
    n = int(points if points is not None else s.sampling.get("points", DEFAULT_POINTS))
    sd = int(seed if seed is not None else s.sampling.get("seed", DEFAULT_SEED))
    expect = s.expect or [(name, True) for name in KIND_CHECKS[s.kind]]
    ctx = _Context(s, n, sd)
    records = []
    for name, want in expect:
        spec = CHECKS[name]
        t = check_tolerance(s, name, tol)
        try:
            r = float(_RUNNERS[name](ctx))
            if not math.isfinite(r):
                raise ArithmeticError("non-finite residual")
            ok = r > t if spec.mode == "gt" else r <= t
            records.append(CheckRecord(name, spec.anchor, r, t, bool(ok), want))
        except _DOMAIN_ERRORS as exc:
            records.append(CheckRecord(name, spec.anchor, None, t, False, want, f"{type(exc).__name__}: {exc}"))
    return Report(s.name, records, n, time.perf_counter() - start)


def run_catalog(names, points: int | None = None, seed: int | None = None, tol: float | None = None) -> list[Report]:
    """Run scenarios one after another, ordered by name."""
    return [run_scenario(catalog_get(n), points, seed, tol) for n in sorted(names)]


def reports_json(reports: list[Report]) -> str:
    return json.dumps({"reports": [r.to_dict() for r in reports],
                       "pass": all(r.passed for r in reports)}, indent=2, sort_keys=True)
