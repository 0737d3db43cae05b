"""Full-reference metrics between colored point clouds.

Geometric distortion is measured point-to-point (D1) and point-to-plane
(D2), each with mean or Hausdorff (max) pooling, and reported as PSNR
against the reference bounding-box diagonal.  Color distortion is measured
as YUV PSNR over nearest-neighbor matches, and a curvature+color structural
score in the PCQM family is provided with configurable feature weights.

A perfect match yields float('inf'); cap_scores() replaces those sentinels
with a finite ceiling before correlation fitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

INF_SENTINEL = float("inf")
CORRELATION_CAP_DB = 100.0


def cap_scores(values, cap: float = CORRELATION_CAP_DB) -> np.ndarray:
    """Replace infinite (perfect-match) scores with a finite cap."""
    arr = np.asarray(values, dtype=np.float64).copy()
    arr[np.isinf(arr)] = cap
    return arr


class SpatialIndex:
    """Immutable nearest-neighbor index over a cloud's positions.

    Queries return the point at globally minimal Euclidean distance; exact
    distance ties resolve to the lowest point index.
    """

    def __init__(self, positions: np.ndarray):
        self.positions = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
        if self.positions.shape[0] == 0:
            raise ValueError("cannot index an empty cloud")
        self._tree = cKDTree(self.positions)

    def nearest(self, queries: np.ndarray):
        """Indices and distances of the nearest points for each query row."""
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        k = min(2, self.positions.shape[0])
        dist, idx = self._tree.query(queries, k=k)
        if k == 1:
            return idx.reshape(-1).astype(np.int64), dist.reshape(-1)
        best = idx[:, 0].astype(np.int64)
        d0 = dist[:, 0]
        tied = dist[:, 1] == d0
        if np.any(tied):
            for row in np.nonzero(tied)[0]:
                cands = self._tree.query_ball_point(queries[row], d0[row])
                exact = [c for c in cands
                         if np.linalg.norm(self.positions[c] - queries[row]) == d0[row]]
                if exact:
                    best[row] = min(exact)
        return best, d0


@dataclass
class MetricResult:
    """Per-frame metric values plus their arithmetic-mean pooling."""

    name: str
    frame_indices: list
    per_frame: list
    pooled: float


def _pool_mean(values) -> float:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return INF_SENTINEL
    return float(np.mean(finite))


def _psnr_from_mse(mse: float, peak: float) -> float:
    if mse <= 0.0:
        return INF_SENTINEL
    return 10.0 * math.log10(peak * peak / mse)


def _ref_peak(ref) -> float:
    ext = ref.positions.max(axis=0) - ref.positions.min(axis=0)
    return float(np.linalg.norm(ext))


def _check_nonempty(ref, dist):
    if len(ref) == 0 or len(dist) == 0:
        raise ValueError("point metrics require non-empty clouds")


def d1_psnr(ref, dist) -> float:
    """Point-to-point PSNR: symmetric max of the two directional mean
    squared NN distances, peak = reference bbox diagonal."""
    _check_nonempty(ref, dist)
    _, d_ab = SpatialIndex(dist.positions).nearest(ref.positions)
    _, d_ba = SpatialIndex(ref.positions).nearest(dist.positions)
    mse = max(float(np.mean(d_ab**2)), float(np.mean(d_ba**2)))
    return _psnr_from_mse(mse, _ref_peak(ref))


def d1_hausdorff(ref, dist) -> float:
    """Point-to-point PSNR with per-direction max pooling."""
    _check_nonempty(ref, dist)
    _, d_ab = SpatialIndex(dist.positions).nearest(ref.positions)
    _, d_ba = SpatialIndex(ref.positions).nearest(dist.positions)
    mse = max(float(np.max(d_ab**2)), float(np.max(d_ba**2)))
    return _psnr_from_mse(mse, _ref_peak(ref))


def _d2_direction_errors(ref, dist):
    """Projected squared errors for both directions; the ref-side normal of
    the matched pair is used in each."""
    if ref.normals is None:
        raise ValueError("point-to-plane metrics require reference normals")
    idx_ab, _ = SpatialIndex(dist.positions).nearest(ref.positions)
    err_ab = dist.positions[idx_ab] - ref.positions
    proj_ab = np.einsum("ij,ij->i", err_ab, ref.normals) ** 2
    idx_ba, _ = SpatialIndex(ref.positions).nearest(dist.positions)
    err_ba = dist.positions - ref.positions[idx_ba]
    proj_ba = np.einsum("ij,ij->i", err_ba, ref.normals[idx_ba]) ** 2
    return proj_ab, proj_ba


def d2_psnr(ref, dist) -> float:
    """Point-to-plane PSNR (mean pooling)."""
    _check_nonempty(ref, dist)
    proj_ab, proj_ba = _d2_direction_errors(ref, dist)
    mse = max(float(np.mean(proj_ab)), float(np.mean(proj_ba)))
    return _psnr_from_mse(mse, _ref_peak(ref))


def d2_hausdorff(ref, dist) -> float:
    """Point-to-plane PSNR (max pooling)."""
    _check_nonempty(ref, dist)
    proj_ab, proj_ba = _d2_direction_errors(ref, dist)
    mse = max(float(np.max(proj_ab)), float(np.max(proj_ba)))
    return _psnr_from_mse(mse, _ref_peak(ref))


def rgb_to_yuv(rgb) -> np.ndarray:
    """BT.709 full-range RGB -> YUV, float output, U/V centered on 128."""
    arr = np.asarray(rgb, dtype=np.float64)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    y = 0.2126 * r + 0.7152 * g + 0.0722 * b
    u = (b - y) / 1.8556 + 128.0
    v = (r - y) / 1.5748 + 128.0
    return np.stack([y, u, v], axis=-1)


def _weighted_yuv_db(psnr_y: float, psnr_u: float, psnr_v: float) -> float:
    vals = [psnr_y, psnr_u, psnr_v]
    if all(math.isinf(v) for v in vals):
        return INF_SENTINEL
    # Perfect channels enter the 6:1:1 weighting at the correlation cap so
    # one untouched channel cannot drag the result to infinity.
    y, u, v = (min(x, CORRELATION_CAP_DB) for x in vals)
    return (6.0 * y + u + v) / 8.0


def yuv_psnr_point(ref, dist) -> float:
    """Color PSNR over NN-matched points: per-channel YUV PSNR combined
    6:1:1, minimum over the two matching directions."""
    _check_nonempty(ref, dist)
    yuv_ref = rgb_to_yuv(ref.colors)
    yuv_dist = rgb_to_yuv(dist.colors)

    def direction(src_yuv, dst_yuv, src_pos, dst_index):
        idx, _ = dst_index.nearest(src_pos)
        diff = src_yuv - dst_yuv[idx]
        mses = np.mean(diff**2, axis=0)
        psnrs = [_psnr_from_mse(float(m), 255.0) for m in mses]
        return _weighted_yuv_db(*psnrs)

    d_ab = direction(yuv_ref, yuv_dist, ref.positions, SpatialIndex(dist.positions))
    d_ba = direction(yuv_dist, yuv_ref, dist.positions, SpatialIndex(ref.positions))
    return min(d_ab, d_ba)


# --- curvature + color structural score --------------------------------------


@dataclass
class PcqmParams:
    """Neighborhood radius and feature weights for the structural score.

    radius is a fraction of the reference bbox diagonal.  Weights should
    sum to 1; hue participates in the comparison but carries no weight by
    default.
    """

    radius_factor: float = 0.004
    weights: dict = field(default_factory=lambda: {
        "curvature": 0.30, "lightness": 0.50, "chroma": 0.20, "hue": 0.0,
    })
    min_neighbors: int = 5
    stabilizer: float = 1e-6


def _lightness(y: np.ndarray) -> np.ndarray:
    t = np.asarray(y, dtype=np.float64) / 255.0
    out = np.where(t > 0.008856, 116.0 * np.cbrt(t) - 16.0, 903.3 * t)
    return out


def _quadric_mean_curvature(neighborhood: np.ndarray, at: np.ndarray) -> float:
    """Mean curvature at `at` from a least-squares quadric height field over
    the neighborhood, expressed in the local plane-fit frame."""
    pts = neighborhood - at
    cov = pts.T @ pts
    w, vecs = np.linalg.eigh(cov)
    normal = vecs[:, 0]
    tangent1 = vecs[:, 1]
    tangent2 = vecs[:, 2]
    u = pts @ tangent1
    v = pts @ tangent2
    h = pts @ normal
    M = np.stack([u * u, u * v, v * v, u, v, np.ones_like(u)], axis=1)
    coef, *_ = np.linalg.lstsq(M, h, rcond=None)
    a, b, c, d, e, _f = coef
    fu, fv = d, e
    fuu, fuv, fvv = 2.0 * a, b, 2.0 * c
    denom = 2.0 * (1.0 + fu * fu + fv * fv) ** 1.5
    return float(((1.0 + fv * fv) * fuu - 2.0 * fu * fv * fuv + (1.0 + fu * fu) * fvv) / denom)


def _ssim_style_distortion(x: np.ndarray, y: np.ndarray, c: float) -> float:
    mx, my = float(np.mean(x)), float(np.mean(y))
    vx, vy = float(np.var(x)), float(np.var(y))
    cov = float(np.mean((x - mx) * (y - my)))
    sim = ((2.0 * mx * my + c) * (2.0 * cov + c)) / ((mx * mx + my * my + c) * (vx + vy + c))
    return float(np.clip(1.0 - sim, 0.0, 1.0))


def pcqm(ref, dist, params: PcqmParams | None = None) -> float:
    """Structural distortion in [0, 1] pooling curvature, lightness, chroma,
    and hue comparisons over radius neighborhoods; 0 means identical.

    Curvature for a point whose neighborhood holds fewer than min_neighbors
    points is skipped and excluded from pooling.
    """
    _check_nonempty(ref, dist)
    params = params or PcqmParams()
    peak = _ref_peak(ref)
    h = params.radius_factor * peak if peak > 0 else params.radius_factor

    ref_index = SpatialIndex(ref.positions)
    dist_index = SpatialIndex(dist.positions)
    match, _ = dist_index.nearest(ref.positions)

    yuv_ref = rgb_to_yuv(ref.colors)
    yuv_dist = rgb_to_yuv(dist.colors)
    feats_ref = {
        "lightness": _lightness(yuv_ref[:, 0]),
        "chroma": np.hypot(yuv_ref[:, 1] - 128.0, yuv_ref[:, 2] - 128.0),
        "hue": np.arctan2(yuv_ref[:, 2] - 128.0, yuv_ref[:, 1] - 128.0),
    }
    feats_dist = {
        "lightness": _lightness(yuv_dist[:, 0]),
        "chroma": np.hypot(yuv_dist[:, 1] - 128.0, yuv_dist[:, 2] - 128.0),
        "hue": np.arctan2(yuv_dist[:, 2] - 128.0, yuv_dist[:, 1] - 128.0),
    }

    n = len(ref)
    ref_balls = ref_index._tree.query_ball_point(ref.positions, h)
    dist_balls = dist_index._tree.query_ball_point(dist.positions[match], h)

    curv_ref = np.full(n, np.nan)
    curv_dist_pts = np.full(len(dist), np.nan)
    for i in range(n):
        ball = ref_balls[i]
        if len(ball) >= params.min_neighbors:
            curv_ref[i] = _quadric_mean_curvature(ref.positions[ball], ref.positions[i])
    needed = np.unique(match)
    dist_ball_by_point = {int(match[i]): dist_balls[i] for i in range(n)}
    for j in needed:
        ball = dist_ball_by_point[int(j)]
        if len(ball) >= params.min_neighbors:
            curv_dist_pts[j] = _quadric_mean_curvature(dist.positions[ball], dist.positions[j])

    sums = {k: 0.0 for k in params.weights}
    counts = {k: 0 for k in params.weights}
    c = params.stabilizer
    for i in range(n):
        ball = np.asarray(ref_balls[i], dtype=np.int64)
        if ball.size == 0:
            continue
        matched = match[ball]
        cx = curv_ref[ball]
        cy = curv_dist_pts[matched]
        valid = ~(np.isnan(cx) | np.isnan(cy))
        if np.count_nonzero(valid) >= params.min_neighbors:
            sums["curvature"] += _ssim_style_distortion(cx[valid], cy[valid], c)
            counts["curvature"] += 1
        for name in ("lightness", "chroma", "hue"):
            sums[name] += _ssim_style_distortion(feats_ref[name][ball],
                                                 feats_dist[name][matched], c)
            counts[name] += 1

    total = 0.0
    for name, w in params.weights.items():
        if w == 0.0 or counts[name] == 0:
            continue
        total += w * (sums[name] / counts[name])
    return float(np.clip(total, 0.0, 1.0))


def pcqm_psnr(ref, dist, params: PcqmParams | None = None) -> float:
    """PSNR-style mapping 10*log10(1/p) of the structural score."""
    p = pcqm(ref, dist, params)
    if p <= 0.0:
        return INF_SENTINEL
    return 10.0 * math.log10(1.0 / p)


def sequence_metric(ref_seq, dist_seq, metric, stride: int = 10,
                    name: str = "metric") -> MetricResult:
    """Evaluate a two-argument metric on frames 0, stride, 2*stride, ... and
    pool by arithmetic mean; perfect-match sentinels are left out of the
    mean unless every frame is perfect."""
    if len(ref_seq) != len(dist_seq):
        raise ValueError("sequences must have equal frame counts")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    indices = list(range(0, len(ref_seq), stride))
    values = [float(metric(ref_seq[i], dist_seq[i])) for i in indices]
    return MetricResult(name, indices, values, _pool_mean(values))
