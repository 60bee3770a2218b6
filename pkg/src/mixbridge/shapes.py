"""Bundled crescent and star silhouette point clouds.

The shape-matching experiment needs planar point clouds for its endpoint
silhouettes. Both shapes are defined by parametric boundary curves and
filled by rejection sampling from their bounding boxes, so the experiment is
self-contained and deterministic given a seed.
"""

import numpy as np

from . import rng

CRESCENT_CENTER = (-3.5, 0.0)
STAR_CENTER = (3.5, 0.0)


def _rejection_fill(accept, lo, hi, n_points, g, batch=4096):
    pts = []
    total = 0
    while total < n_points:
        cand = lo + (hi - lo) * g.random((batch, 2))
        keep = cand[accept(cand)]
        pts.append(keep)
        total += keep.shape[0]
    return np.concatenate(pts)[:n_points]


def crescent_points(n_points: int = 4000, seed: int = 0) -> np.ndarray:
    """Filled crescent: a disc with an offset disc carved out, opening right."""
    cx, cy = CRESCENT_CENTER
    r_outer = 2.0
    r_inner = 1.55
    offset = 0.85

    def accept(p):
        dx = p[:, 0] - cx
        dy = p[:, 1] - cy
        inside = dx * dx + dy * dy <= r_outer**2
        dxi = p[:, 0] - (cx + offset)
        hole = dxi * dxi + dy * dy <= r_inner**2
        return inside & ~hole

    g = rng.stream(seed, rng.SHAPES, 0)
    lo = np.array([cx - r_outer, cy - r_outer])
    hi = np.array([cx + r_outer, cy + r_outer])
    return _rejection_fill(accept, lo, hi, n_points, g)


def _star_polygon(cx, cy, r_outer, r_inner, n_spikes=5, phase=np.pi / 2):
    angles = phase + np.arange(2 * n_spikes) * np.pi / n_spikes
    radii = np.where(np.arange(2 * n_spikes) % 2 == 0, r_outer, r_inner)
    return np.column_stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)])


def _points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd ray casting, vectorized over points."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(pts.shape[0], dtype=bool)
    n = poly.shape[0]
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (x2 - x1) * (y - y1) / (y2 - y1) + x1
        inside ^= crosses & (x < xint)
    return inside


def star_points(n_points: int = 4000, seed: int = 0) -> np.ndarray:
    """Filled five-pointed star."""
    cx, cy = STAR_CENTER
    poly = _star_polygon(cx, cy, r_outer=2.2, r_inner=0.95)

    def accept(p):
        return _points_in_polygon(p, poly)

    g = rng.stream(seed, rng.SHAPES, 1)
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    return _rejection_fill(accept, lo, hi, n_points, g)


GENERATORS = {"crescent": crescent_points, "star": star_points}
