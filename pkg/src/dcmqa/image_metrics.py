"""Image- and video-family metrics over rendered views and frames.

View-set metrics (depth PSNR, RGB PSNR, weighted YUV PSNR) average over the
viewpoint set with perfect-match sentinels excluded; frame metrics (PSNR,
SSIM, MS-SSIM) are pooled by video_metric at a configurable frame stride.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import convolve1d

from .pointcloud_metrics import (INF_SENTINEL, MetricResult, _pool_mean,
                                 _psnr_from_mse, _weighted_yuv_db, rgb_to_yuv)
from .render import RenderedView, joint_depth_bounds, normalize_depth

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def psnr_image(a: np.ndarray, b: np.ndarray, channels=None) -> float:
    """PSNR with MSE pooled jointly over all pixels and selected channels;
    identical images return the infinity sentinel."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if channels is not None and a.ndim == 3:
        a = a[..., list(channels)]
        b = b[..., list(channels)]
    mse = float(np.mean((a - b) ** 2))
    return _psnr_from_mse(mse, 255.0)


def _check_view_lists(ref_views, dist_views):
    if len(ref_views) != len(dist_views):
        raise ValueError("view lists must have equal length")
    if not ref_views:
        raise ValueError("need at least one view")


def geo_psnr(ref_views, dist_views) -> float:
    """Depth PSNR over a view set.

    Each ref/dist pair is normalized to 8 bits on their joint finite depth
    range (so both use one scale), then PSNR is taken over all pixels and
    averaged across views.  Texture-only distortions leave depth untouched
    and therefore return the infinity sentinel.
    """
    _check_view_lists(ref_views, dist_views)
    values = []
    for rv, dv in zip(ref_views, dist_views):
        lo, hi = joint_depth_bounds(rv, dv)
        ra = normalize_depth(rv, lo, hi)
        da = normalize_depth(dv, lo, hi)
        values.append(psnr_image(ra, da))
    return _pool_mean(values)


def rgb_psnr(ref_views, dist_views) -> float:
    """Color PSNR over a view set, RGB channels pooled jointly."""
    _check_view_lists(ref_views, dist_views)
    values = [psnr_image(rv.color, dv.color) for rv, dv in zip(ref_views, dist_views)]
    return _pool_mean(values)


def yuv_psnr_image(ref_views, dist_views) -> float:
    """Color PSNR over a view set in YUV with 6:1:1 channel weighting."""
    _check_view_lists(ref_views, dist_views)
    values = []
    for rv, dv in zip(ref_views, dist_views):
        ya = rgb_to_yuv(rv.color)
        yb = rgb_to_yuv(dv.color)
        mses = np.mean((ya - yb) ** 2, axis=(0, 1))
        psnrs = [_psnr_from_mse(float(m), 255.0) for m in mses]
        values.append(_weighted_yuv_db(*psnrs))
    return _pool_mean(values)


def _to_luma(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        return rgb_to_yuv(arr)[..., 0]
    return arr


def _gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _windowed_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable filter; cropping the margin afterwards gives exactly the
    # valid-region (no padding) windowed statistics.
    half = kernel.size // 2
    t = convolve1d(img, kernel, axis=0, mode="constant")
    t = convolve1d(t, kernel, axis=1, mode="constant")
    return t[half:-half or None, half:-half or None]


def _ssim_parts(a: np.ndarray, b: np.ndarray, k1: float = 0.01, k2: float = 0.03,
                peak: float = 255.0):
    """Mean luminance term and contrast-structure term over valid windows."""
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ValueError(
            f"image sides must be at least {SSIM_WINDOW} px, got {a.shape}"
        )
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    kernel = _gaussian_kernel()
    mu_a = _windowed_mean(a, kernel)
    mu_b = _windowed_mean(b, kernel)
    var_a = _windowed_mean(a * a, kernel) - mu_a * mu_a
    var_b = _windowed_mean(b * b, kernel) - mu_b * mu_b
    cov = _windowed_mean(a * b, kernel) - mu_a * mu_b
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2.0 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def ssim(a, b) -> float:
    """Structural similarity on luma: 11x11 Gaussian windows (sigma 1.5),
    K1=0.01, K2=0.03, dynamic range 255, valid-region windows only."""
    la = _to_luma(a)
    lb = _to_luma(b)
    if la.shape != lb.shape:
        raise ValueError(f"image shapes differ: {la.shape} vs {lb.shape}")
    lum, cs = _ssim_parts(la, lb)
    return float(np.mean(lum * cs))


def _halve(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    h2, w2 = h // 2 * 2, w // 2 * 2
    img = img[:h2, :w2]
    return (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2]) / 4.0


def ms_ssim(a, b) -> float:
    """Multi-scale SSIM over 5 dyadic scales with the standard exponents;
    contrast/structure at every scale, luminance at the coarsest only.

    Requires both image sides to be at least 176 px so the coarsest scale
    still fits an 11-tap window.
    """
    la = _to_luma(a)
    lb = _to_luma(b)
    if la.shape != lb.shape:
        raise ValueError(f"image shapes differ: {la.shape} vs {lb.shape}")
    scales = len(MS_SSIM_WEIGHTS)
    min_side = min(la.shape)
    if min_side // (2 ** (scales - 1)) < SSIM_WINDOW:
        raise ValueError(
            f"image sides must be at least {SSIM_WINDOW * 2 ** (scales - 1)} px "
            f"for {scales} scales, got {la.shape}"
        )
    value = 1.0
    for level in range(scales):
        lum, cs = _ssim_parts(la, lb)
        w = MS_SSIM_WEIGHTS[level]
        if level == scales - 1:
            value *= float(np.mean(lum * cs)) ** w
        else:
            # Negative window means are rare on natural content; clamp so the
            # fractional exponent stays real.
            value *= max(float(np.mean(cs)), 0.0) ** w
            la = _halve(la)
            lb = _halve(lb)
    return float(value)


def video_metric(ref_frames, dist_frames, metric, stride: int = 10,
                 name: str = "metric") -> MetricResult:
    """Frame-wise metric at the given stride with arithmetic-mean pooling;
    sentinels are excluded from the mean unless every frame is perfect."""
    if len(ref_frames) != len(dist_frames):
        raise ValueError("frame lists must have equal length")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    indices = list(range(0, len(ref_frames), stride))
    values = [float(metric(ref_frames[i], dist_frames[i])) for i in indices]
    return MetricResult(name, indices, values, _pool_mean(values))
