"""Command line entry point: ``grslab``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import catalog as C
from . import warped as W
from .expr import parse, to_string
from .solitons import soliton_identities_from_stack, residual_from_stack

EXIT_OK, EXIT_FAIL, EXIT_ERROR, EXIT_USAGE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--points", type=int, default=None, help="sample count (default 1000)")
    p.add_argument("--seed", type=int, default=None, help="sampling seed (default 42)")
    p.add_argument("--tol", type=float, default=None, help="override every residual tolerance")
    p.add_argument("--json", metavar="PATH", default=None, help="write the report as JSON")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="grslab", description="Verify gradient Ricci soliton identities and examples.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cat = sub.add_parser("catalog", help="list or run named scenarios")
    csub = cat.add_subparsers(dest="action", required=True, parser_class=_Parser)
    csub.add_parser("list", help="print the scenario names")
    run = csub.add_parser("run", help="run one scenario or all of them")
    run.add_argument("name", help="scenario name or 'all'")
    _run_flags(run)

    ver = sub.add_parser("verify", help="run a scenario JSON file")
    ver.add_argument("path")
    _run_flags(ver)

    warp = sub.add_parser("warp", help="integrate the warping ODE")
    warp.add_argument("--eps", type=int, choices=(1, -1), required=True)
    warp.add_argument("--lambda", dest="lam", type=float, required=True)
    warp.add_argument("--c", type=float, required=True)
    warp.add_argument("--phi0", type=float, required=True)
    warp.add_argument("--dphi0", type=float, required=True)
    warp.add_argument("--ddphi0", type=float, required=True)
    warp.add_argument("--t0", type=float, required=True)
    warp.add_argument("--t1", type=float, required=True)
    warp.add_argument("--step", type=float, required=True)
    warp.add_argument("--csv", metavar="PATH", default=None)
    warp.add_argument("--verify", action="store_true", help="assemble the 4D metric and check it")
    warp.add_argument("--fiber", default=None,
                      help="fiber signs, e.g. 1,-1,-1 (default: the choice giving neutral signature)")
    warp.add_argument("--points", type=int, default=200)
    warp.add_argument("--seed", type=int, default=42)

    pa = sub.add_parser("parse", help="parse an expression and print its normal form")
    pa.add_argument("--check", required=True, metavar="EXPR")
    pa.add_argument("--coords", default="x1,x2")
    return p


def _print_report(r: C.Report) -> None:
    status = "ERROR" if r.errored else ("PASS" if r.passed else "FAIL")
    print(f"{status:5s} {r.scenario} ({len(r.checks)} checks, {r.samples} samples)")
    for c in r.checks:
        if c.error is not None:
            print(f"      {c.name}: {c.error}")
        elif not c.matched:
            print(f"      {c.name}: residual {c.residual:.3e} tol {c.tol:.1e}, expected "
                  f"{'pass' if c.expected else 'fail'}")


def _finish(reports: list[C.Report], json_path: str | None) -> int:
    for r in reports:
        _print_report(r)
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(C.reports_json(reports) + "\n")
    if any(r.errored for r in reports):
        return EXIT_ERROR
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _cmd_catalog(a) -> int:
    if a.action == "list":
        for name in C.catalog_list():
            print(f"{name:26s} {C.catalog_get(name).kind}")
        return EXIT_OK
    names = C.catalog_list() if a.name == "all" else [a.name]
    if a.name != "all" and a.name not in C.catalog_list():
        print(f"unknown scenario {a.name!r}; try 'grslab catalog list'", file=sys.stderr)
        return EXIT_USAGE
    return _finish(C.run_catalog(names, a.points, a.seed, a.tol), a.json)


def _cmd_verify(a) -> int:
    try:
        s = C.load_scenario(a.path)
    except (OSError, C.ScenarioError) as exc:
        print(f"cannot load scenario: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return _finish([C.run_scenario(s, a.points, a.seed, a.tol)], a.json)


def _cmd_warp(a) -> int:
    try:
        traj = W.integrate_phi(a.eps, a.lam, a.c, a.phi0, a.dphi0, a.ddphi0, a.t0, a.t1, a.step)
    except W.WarpedDomainError as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"nodes {len(traj.t)}  t in [{traj.t.min():.6g}, {traj.t.max():.6g}]")
    if traj.stop_reason:
        print(f"stopped early: {traj.stop_reason}")
    print(f"max residual9 {np.max(traj.residual9):.3e}  max residual10 {np.max(traj.residual10):.3e}")
    if a.csv:
        traj.write_csv(a.csv)
    if not a.verify:
        return EXIT_OK
    if a.fiber:
        signs = tuple(int(s) for s in a.fiber.split(","))
    else:
        signs = (1, -1, -1) if a.eps == 1 else (1, 1, -1)
    try:
        ws = W.assemble_warped_metric(traj, W.FiberModel(a.c, signs))
        pts = ws.sample(a.points, a.seed)
        st = ws.instance.stack(pts, 3)
        f = ws.instance.f
        grs = C._rel(residual_from_stack(st, f, a.lam), st.hessian(f), st.ricci)
        weyl = C._rel(st.weyl, st.riemann)
        l1 = max(soliton_identities_from_stack(st, f, a.lam))
    except (ValueError, ArithmeticError) as exc:
        print(f"verification error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    ok = grs <= 1e-5 and weyl <= 1e-5 and l1 <= 1e-4
    print(f"signature {ws.instance.metric.signature}  grs {grs:.3e}  weyl {weyl:.3e}  identities {l1:.3e}  "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_parse(a) -> int:
    coords = [c.strip() for c in a.coords.split(",") if c.strip()]
    try:
        e = parse(a.check, coords)
    except (ValueError, ArithmeticError) as exc:
        print(f"invalid: {exc}")
        return EXIT_FAIL
    print(to_string(e))
    return EXIT_OK


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    handler = {"catalog": _cmd_catalog, "verify": _cmd_verify, "warp": _cmd_warp, "parse": _cmd_parse}
    return handler[a.command](a)


if __name__ == "__main__":
    sys.exit(main())
