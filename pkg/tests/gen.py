"""Random inputs shared by the test modules."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from grslab.affine import GAMMA_KEYS, AffineConnection2D
from grslab import jets as J
from grslab.expr import Expr, const, eval_jet, exp, ln, parse, sqrt, var
from grslab.extension import DeformationTensor

BASE = ("x1", "x2")


def rel(r, *scales) -> float:
    """max|r| / max(1, max|scale|), the tolerance convention used throughout."""
    s = max([1.0] + [float(np.max(np.abs(a))) for a in scales if np.size(a)])
    return float(np.max(np.abs(r))) / s


def smooth_expr(rng: np.random.Generator, nvars: int, depth: int = 3) -> Expr:
    """Random expression that is smooth and bounded on [0.5, 1.5]^nvars."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            k = int(rng.integers(nvars))
            return var(f"x{k + 1}", k)
        return const(round(float(rng.uniform(-2, 2)), 3))
    a = smooth_expr(rng, nvars, depth - 1)
    op = rng.choice(["add", "sub", "mul", "div", "exp", "ln", "sqrt", "pow"])
    if op in ("add", "sub", "mul"):
        b = smooth_expr(rng, nvars, depth - 1)
        return Expr(op, (a, b))
    if op == "div":
        b = smooth_expr(rng, nvars, depth - 1)
        return a / (const(1.0) + b * b)
    if op == "exp":
        return exp(const(0.3) * a / (const(1.0) + a * a))
    if op == "ln":
        return ln(const(1.0) + a * a)
    if op == "sqrt":
        return sqrt(const(2.0) + a * a)
    return a ** int(rng.integers(2, 4))


def printable_ast(rng: np.random.Generator, coords, depth: int = 4) -> Expr:
    """Random AST in the parser's normal form.

    Literal-literal operations, negated literals and powers of literals fold
    at parse time, so they are never generated.
    """
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            k = int(rng.integers(len(coords)))
            return var(coords[k], k)
        x = float(rng.choice([0.5, 1.0, 2.0, 3.0, 1e-5, 1.25e7])) * (1 if rng.random() < 0.7 else -1)
        return const(x)
    kind = rng.choice(["add", "sub", "mul", "div", "neg", "pow", "exp", "ln", "sqrt"])
    a = printable_ast(rng, coords, depth - 1)
    if kind in ("add", "sub", "mul", "div"):
        b = printable_ast(rng, coords, depth - 1)
        if a.kind == "const" and b.kind == "const":
            b = var(coords[0], 0)
        return Expr(kind, (a, b))
    if kind in ("neg", "pow") and a.kind == "const":
        a = var(coords[-1], len(coords) - 1)
    if kind == "pow":
        return Expr("pow", (a,), Fraction(int(rng.integers(-3, 4)) or 2, int(rng.choice([1, 1, 2, 3]))))
    return Expr(kind, (a,))


def poly2(rng: np.random.Generator, scale: float = 0.5) -> Expr:
    """Random polynomial of degree <= 2 in (x1, x2)."""
    a = [float(v) for v in rng.normal(size=6) * scale]
    return parse(f"{a[0]!r} + {a[1]!r}*x1 + {a[2]!r}*x2 + {a[3]!r}*x1^2 + {a[4]!r}*x1*x2 + {a[5]!r}*x2^2",
                 BASE)


def random_connection(rng: np.random.Generator) -> AffineConnection2D:
    return AffineConnection2D({k: poly2(rng) for k in GAMMA_KEYS})


def random_deformation(rng: np.random.Generator) -> DeformationTensor:
    return DeformationTensor(poly2(rng), poly2(rng), poly2(rng))


def type_a_rank_one(rng: np.random.Generator) -> dict:
    """Type A constants with gamma^1_12 = gamma^1_22 = 0 and nonzero Ricci."""
    while True:
        g = {"111": float(rng.uniform(-2, 2)), "211": float(rng.uniform(-2, 2)),
             "212": float(rng.uniform(-2, 2)), "222": float(rng.uniform(-2, 2))}
        if rng.random() < 0.2:
            g["111"] = 0.0
        rho = g["111"] * g["212"] + g["211"] * g["222"] - g["212"] ** 2
        if abs(rho) > 0.1:
            return g


def jet_fd_error(rng: np.random.Generator, count: int, h: float = 1e-5) -> float:
    """Worst relative gap between jet partials and central differences of the order below."""
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(1, 5))
        e = smooth_expr(rng, n)
        p = rng.uniform(0.5, 1.5, size=n)
        jt = eval_jet(e, p, 3)
        for alpha in J.multi_indices(n, 3):
            if sum(alpha) == 0:
                continue
            k = next(i for i, a in enumerate(alpha) if a)
            lower = tuple(a - (i == k) for i, a in enumerate(alpha))
            step = np.eye(n)[k] * h
            hi = eval_jet(e, p + step, sum(lower)).partial(lower)
            lo = eval_jet(e, p - step, sum(lower)).partial(lower)
            fd = (hi - lo) / (2 * h)
            worst = max(worst, abs(fd - jt.partial(alpha)) / max(1.0, abs(fd)))
    return worst
