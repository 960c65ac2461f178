"""Deterministic sample points."""
from __future__ import annotations

import numpy as np

BASE_BOX = (0.1, 2.0)
FIBER_BOX = (-1.0, 1.0)


def default_box(kind: str, dim: int) -> list[tuple[float, float]]:
    if kind == "extension":
        return [BASE_BOX, BASE_BOX, FIBER_BOX, FIBER_BOX]
    return [BASE_BOX] * dim


def sample_points(box, count: int, seed: int = 42) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must be a list of [lo, hi] pairs with lo < hi")
    rng = np.random.default_rng(seed)
    u = rng.random((count, box.shape[0]))
    return box[:, 0] + u * (box[:, 1] - box[:, 0])
