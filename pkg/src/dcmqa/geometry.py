"""Low-level triangle geometry kernels shared by sampling and metrics."""

from __future__ import annotations

import numpy as np


def face_normal(a, b, c):
    """Unit normal of triangle (a, b, c); zero vector for degenerate faces."""
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        return np.zeros(3)
    return n / norm


def face_area(a, b, c) -> float:
    return 0.5 * float(np.linalg.norm(np.cross(b - a, c - a)))


def closest_point_on_triangle(p, a, b, c):
    """Closest point to p on triangle (a, b, c) plus its barycentric coords.

    Region-based method: classifies p against the vertex, edge, and face
    Voronoi regions of the triangle.  Returns (point, (w_a, w_b, w_c)).
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = float(np.dot(ab, ap))
    d2 = float(np.dot(ac, ap))
    if d1 <= 0.0 and d2 <= 0.0:
        return a.copy(), (1.0, 0.0, 0.0)

    bp = p - b
    d3 = float(np.dot(ab, bp))
    d4 = float(np.dot(ac, bp))
    if d3 >= 0.0 and d4 <= d3:
        return b.copy(), (0.0, 1.0, 0.0)

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        denom = d1 - d3
        v = d1 / denom if denom != 0.0 else 0.0
        return a + v * ab, (1.0 - v, v, 0.0)

    cp = p - c
    d5 = float(np.dot(ab, cp))
    d6 = float(np.dot(ac, cp))
    if d6 >= 0.0 and d5 <= d6:
        return c.copy(), (0.0, 0.0, 1.0)

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        denom = d2 - d6
        w = d2 / denom if denom != 0.0 else 0.0
        return a + w * ac, (1.0 - w, 0.0, w)

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        denom = (d4 - d3) + (d5 - d6)
        w = (d4 - d3) / denom if denom != 0.0 else 0.0
        return b + w * (c - b), (0.0, 1.0 - w, w)

    denom = va + vb + vc
    v = vb / denom
    w = vc / denom
    return a + ab * v + ac * w, (1.0 - v - w, v, w)


def triangle_intersects_box(a, b, c, center, half) -> bool:
    """Separating-axis test between a triangle and an axis-aligned box.

    The box is closed: touching counts as intersecting.  `half` is the
    half-extent (scalar or 3-vector) around `center`.
    """
    half = np.broadcast_to(np.asarray(half, dtype=np.float64), (3,))
    v0 = a - center
    v1 = b - center
    v2 = c - center

    # Box face normals.
    lo = np.minimum(np.minimum(v0, v1), v2)
    hi = np.maximum(np.maximum(v0, v1), v2)
    if np.any(lo > half) or np.any(hi < -half):
        return False

    f0 = v1 - v0
    f1 = v2 - v1
    f2 = v0 - v2

    # Triangle plane.
    n = np.cross(f0, f1)
    r = float(half[0] * abs(n[0]) + half[1] * abs(n[1]) + half[2] * abs(n[2]))
    d = float(np.dot(n, v0))
    if d > r or d < -r:
        return False

    # Nine edge cross-product axes.
    for f in (f0, f1, f2):
        for axis in range(3):
            u = np.zeros(3)
            u[axis] = 1.0
            ax = np.cross(u, f)
            p0 = float(np.dot(ax, v0))
            p1 = float(np.dot(ax, v1))
            p2 = float(np.dot(ax, v2))
            r = float(half[0] * abs(ax[0]) + half[1] * abs(ax[1]) + half[2] * abs(ax[2]))
            if min(p0, p1, p2) > r or max(p0, p1, p2) < -r:
                return False
    return True
