"""Synthetic sets of known box dimension for calibrating the estimator.

Each constructor returns a LevelSet whose crossing cells are built directly
from geometry, so the box-counting pipeline can be validated against exact
answers: a line (dimension 1), a filled square (dimension 2), the Koch curve
(log 4 / log 3), and a random dyadic Cantor set crossed with a full circle
(dimension 3/2, with exact per-scale box counts by construction).
"""

from __future__ import annotations

import numpy as np

from .fractal import LevelSet
from .spectral import TORUS_SIDE, grid_axis


def _require_power_of_two(resolution: int) -> int:
    level = int(np.log2(resolution))
    if 2**level != resolution:
        raise ValueError(f"resolution must be a power of two, got {resolution}")
    return level


def horizontal_line(resolution: int) -> LevelSet:
    """A full horizontal circle through the middle row: N_k = 2^k exactly."""
    _require_power_of_two(resolution)
    axis = grid_axis(resolution)
    h = TORUS_SIDE / resolution
    j = resolution // 2
    x2 = axis[j] + 0.5 * h
    ii = np.arange(resolution, dtype=np.int64)
    cells = np.stack([ii, np.full(resolution, j, dtype=np.int64)], axis=1)
    starts = np.stack([axis[ii], np.full(resolution, x2)], axis=1)
    ends = starts.copy()
    ends[:, 0] += h
    return LevelSet(
        level=0.0,
        resolution=resolution,
        crossing_cells=cells,
        segments=np.stack([starts, ends], axis=1),
    )


def filled_square(resolution: int, side: float = np.pi) -> LevelSet:
    """A filled axis-aligned square [0, side]^2: box counts grow like 4^k."""
    level = _require_power_of_two(resolution)
    del level
    h = TORUS_SIDE / resolution
    m = int(round(side / h))
    if m < 1 or m > resolution:
        raise ValueError(f"side {side} maps to {m} cells, out of range")
    i0 = resolution // 2  # axis index of x = 0
    ii = np.arange(i0, i0 + m, dtype=np.int64)
    gi, gj = np.meshgrid(ii, ii, indexing="ij")
    cells = np.stack([gi.ravel(), gj.ravel()], axis=1)
    axis = grid_axis(resolution)
    xs = axis[cells[:, 0]]
    ys = axis[cells[:, 1]] + 0.5 * h
    starts = np.stack([xs, ys], axis=1)
    ends = starts.copy()
    ends[:, 0] += h
    return LevelSet(
        level=0.0,
        resolution=resolution,
        crossing_cells=cells,
        segments=np.stack([starts, ends], axis=1),
    )


def _rasterize_segments(segments: np.ndarray, resolution: int) -> np.ndarray:
    """Cells touched by a polyline, by dense sampling at quarter-cell steps."""
    h = TORUS_SIDE / resolution
    pts = []
    for p, q in segments:
        length = float(np.linalg.norm(q - p))
        n_samples = max(2, int(np.ceil(length / (0.25 * h))) + 1)
        ts = np.linspace(0.0, 1.0, n_samples)
        pts.append(p[None, :] + ts[:, None] * (q - p)[None, :])
    allpts = np.concatenate(pts, axis=0)
    cells = np.floor((allpts + np.pi) / h).astype(np.int64) % resolution
    return np.unique(cells, axis=0)


def koch_curve(resolution: int, iterations: int = 5) -> LevelSet:
    """The Koch curve (dimension log 4 / log 3 ~ 1.2619) on a tilted baseline.

    Built by the usual middle-third replacement starting from a single
    baseline segment; the tilt avoids axis-aligned degeneracies in the
    dyadic box grid, and the baseline nearly spans the torus so the counting
    window sits inside the self-similar range.
    """
    _require_power_of_two(resolution)
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    # Baseline chosen so the bump (height |q - p| sqrt(3)/6) stays on the torus.
    p0 = np.array([-3.0, -1.45])
    p1 = np.array([3.05, -0.8])
    rot = np.array(
        [
            [np.cos(-np.pi / 3.0), -np.sin(-np.pi / 3.0)],
            [np.sin(-np.pi / 3.0), np.cos(-np.pi / 3.0)],
        ]
    )
    segments = [(p0, p1)]
    for _ in range(iterations):
        refined = []
        for p, q in segments:
            v = (q - p) / 3.0
            a = p + v
            b = a + rot @ v
            c = p + 2.0 * v
            refined.extend([(p, a), (a, b), (b, c), (c, q)])
        segments = refined
    seg_arr = np.array(segments)
    cells = _rasterize_segments(seg_arr, resolution)
    return LevelSet(
        level=0.0, resolution=resolution, crossing_cells=cells, segments=seg_arr
    )


def cantor_product(resolution: int, seed: int = 0) -> LevelSet:
    """Random dyadic Cantor set (dimension 1/2) crossed with a full circle.

    At dyadic level m exactly round(2^(m/2)) intervals survive, every parent
    keeping at least one child, so the product with the second circle meets
    exactly round(2^(k/2)) * 2^k boxes at scale k -- box counts are exact at
    every scale and the box dimension is 3/2 by construction.
    """
    level = _require_power_of_two(resolution)
    rng = np.random.default_rng(seed)
    kept = np.array([0], dtype=np.int64)
    for m in range(1, level + 1):
        target = int(round(2.0 ** (0.5 * m)))
        # One child per parent keeps every ancestor alive; the remainder of
        # the budget doubles randomly chosen parents.
        pick = rng.integers(0, 2, size=kept.size)
        children = 2 * kept + pick
        extras = target - kept.size
        if extras > 0:
            doubled = rng.choice(kept.size, size=extras, replace=False)
            children = np.concatenate([children, 2 * kept[doubled] + (1 - pick[doubled])])
        kept = np.sort(children)
    axis = grid_axis(resolution)
    h = TORUS_SIDE / resolution
    jj = np.arange(resolution, dtype=np.int64)
    gi, gj = np.meshgrid(kept, jj, indexing="ij")
    cells = np.stack([gi.ravel(), gj.ravel()], axis=1)
    xs = axis[cells[:, 0]] + 0.5 * h
    ys = axis[cells[:, 1]]
    starts = np.stack([xs, ys], axis=1)
    ends = starts.copy()
    ends[:, 1] += h
    return LevelSet(
        level=0.0,
        resolution=resolution,
        crossing_cells=cells,
        segments=np.stack([starts, ends], axis=1),
    )
