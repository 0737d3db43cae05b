import math

import numpy as np
import pytest

from dcmqa.pointcloud_metrics import (CORRELATION_CAP_DB, INF_SENTINEL, PcqmParams,
                                      SpatialIndex, cap_scores, d1_hausdorff,
                                      d1_psnr, d2_hausdorff, d2_psnr, pcqm,
                                      pcqm_psnr, rgb_to_yuv, sequence_metric,
                                      yuv_psnr_point)
from dcmqa.sampling import ColoredPointCloud
from oracles import brute_force_nn


def _cloud(positions, colors=None, normals=None):
    positions = np.asarray(positions, dtype=np.float64)
    if colors is None:
        colors = np.zeros((len(positions), 3), dtype=np.uint8)
    return ColoredPointCloud(positions=positions, colors=colors, normals=normals)


def _random_cloud(n, seed, colored=True):
    rng = np.random.default_rng(seed)
    colors = rng.integers(0, 256, (n, 3)).astype(np.uint8) if colored else None
    return _cloud(rng.normal(size=(n, 3)), colors)


class TestSpatialIndex:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(200, 3))
        queries = rng.normal(size=(150, 3))
        idx = SpatialIndex(pts)
        got_i, got_d = idx.nearest(queries)
        ref_i, ref_d = brute_force_nn(queries, pts)
        assert np.array_equal(got_i, ref_i)
        assert np.allclose(got_d, ref_d)

    def test_ties_resolve_to_lowest_index(self):
        # two identical points: queries must match index 0
        pts = np.array([[1.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
        idx = SpatialIndex(pts)
        got_i, _ = idx.nearest(np.array([[1.0, 0, 0], [0.5, 0, 0], [1.4, 0, 0]]))
        assert got_i.tolist() == [0, 0, 0]

    def test_symmetric_tie_between_distinct_points(self):
        pts = np.array([[0.0, 0, 0], [2.0, 0, 0]])
        idx = SpatialIndex(pts)
        got_i, _ = idx.nearest(np.array([[1.0, 0, 0]]))
        assert got_i.tolist() == [0]

    def test_empty_cloud_rejected(self):
        with pytest.raises(ValueError):
            SpatialIndex(np.zeros((0, 3)))


class TestD1:
    def test_identical_clouds_sentinel(self):
        c = _random_cloud(50, 0)
        assert d1_psnr(c, c) == INF_SENTINEL

    def test_two_point_hand_case(self):
        ref = _cloud([[0, 0, 0], [1, 0, 0]])
        dist = _cloud([[0, 0, 0.1], [1, 0, 0.1]])
        assert d1_psnr(ref, dist) == pytest.approx(20.0, abs=0.01)

    def test_symmetric_pooling(self):
        # pin both bboxes to the same corners so swapping arguments is a
        # pure pooling symmetry check (peak is the ref bbox diagonal)
        rng = np.random.default_rng(2)
        base = rng.normal(size=(60, 3))
        lo, hi = base.min(axis=0), base.max(axis=0)
        noisy = np.clip(base + rng.normal(0, 0.01, (60, 3)), lo, hi)
        a = _cloud(np.vstack([base, lo, hi]))
        b = _cloud(np.vstack([noisy, lo, hi]))
        assert d1_psnr(a, b) == pytest.approx(d1_psnr(b, a), abs=1e-9)

    def test_monotone_in_plane_displacement(self):
        base = np.stack([np.repeat(np.arange(10.0), 10), np.tile(np.arange(10.0), 10),
                         np.zeros(100)], axis=1)
        ref = _cloud(base)
        values = []
        for delta in (0.01, 0.02, 0.05, 0.1):
            dist = _cloud(base + np.array([0, 0, delta]))
            values.append(d1_psnr(ref, dist))
            # closed form: every NN pair is the vertical neighbor
            peak = math.sqrt(2 * 9.0**2)
            assert values[-1] == pytest.approx(10 * math.log10(peak**2 / delta**2), abs=1e-9)
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_empty_cloud_rejected(self):
        c = _random_cloud(5, 3)
        with pytest.raises(ValueError):
            d1_psnr(c, _cloud(np.zeros((0, 3))))


class TestD2:
    def test_tangent_displacement_invisible(self):
        base = np.stack([np.repeat(np.arange(8.0), 8), np.tile(np.arange(8.0), 8),
                         np.zeros(64)], axis=1)
        normals = np.tile([0.0, 0.0, 1.0], (64, 1))
        ref = ColoredPointCloud(base, np.zeros((64, 3), np.uint8), normals)
        dist = _cloud(base + np.array([0.3, 0.0, 0.0]))
        assert d2_psnr(ref, dist) == INF_SENTINEL
        assert d1_psnr(ref, dist) < INF_SENTINEL

    def test_normal_displacement_equals_d1(self):
        base = np.stack([np.repeat(np.arange(8.0), 8), np.tile(np.arange(8.0), 8),
                         np.zeros(64)], axis=1)
        normals = np.tile([0.0, 0.0, 1.0], (64, 1))
        ref = ColoredPointCloud(base, np.zeros((64, 3), np.uint8), normals)
        dist = _cloud(base + np.array([0.0, 0.0, 0.1]))
        assert d2_psnr(ref, dist) == pytest.approx(d1_psnr(ref, dist), abs=1e-9)
        assert d2_psnr(ref, dist) == pytest.approx(
            10 * math.log10((base.max() * math.sqrt(2)) ** 2 / 0.01), abs=1e-9)

    def test_self_sentinel(self):
        c = _random_cloud(30, 4)
        c = ColoredPointCloud(c.positions, c.colors,
                              np.tile([0.0, 0.0, 1.0], (30, 1)))
        assert d2_psnr(c, c) == INF_SENTINEL

    def test_missing_normals_rejected(self):
        c = _random_cloud(10, 5)
        with pytest.raises(ValueError, match="normals"):
            d2_psnr(c, c)


class TestHausdorff:
    def test_single_outlier_dominates(self):
        base = np.stack([np.linspace(0, 1, 50), np.zeros(50), np.zeros(50)], axis=1)
        ref = _cloud(base)
        moved = base.copy()
        moved[25, 2] = 1.0  # one point off by exactly the bbox diagonal (peak 1)
        dist = _cloud(moved)
        assert d1_hausdorff(ref, dist) == pytest.approx(0.0, abs=1e-9)

    def test_identical_sentinel(self):
        c = _random_cloud(20, 6)
        assert d1_hausdorff(c, c) == INF_SENTINEL

    def test_hausdorff_never_above_mean_version(self):
        rng = np.random.default_rng(7)
        for seed in range(5):
            a = _random_cloud(80, seed)
            b = _cloud(a.positions + rng.normal(0, 0.02, (80, 3)))
            assert d1_hausdorff(a, b) <= d1_psnr(a, b)

    def test_d2_hausdorff_self(self):
        c = _random_cloud(30, 8)
        c = ColoredPointCloud(c.positions, c.colors, np.tile([0.0, 0.0, 1.0], (30, 1)))
        assert d2_hausdorff(c, c) == INF_SENTINEL


class TestYuvConversion:
    def test_anchor_colors(self):
        assert np.allclose(rgb_to_yuv([255, 255, 255]), [255, 128, 128], atol=1e-9)
        assert np.allclose(rgb_to_yuv([0, 0, 0]), [0, 128, 128], atol=1e-9)
        assert np.allclose(rgb_to_yuv([128, 128, 128]), [128, 128, 128], atol=1e-9)

    def test_coefficients(self):
        y, u, v = rgb_to_yuv([100, 50, 200])
        assert y == pytest.approx(0.2126 * 100 + 0.7152 * 50 + 0.0722 * 200)
        assert u == pytest.approx((200 - y) / 1.8556 + 128)
        assert v == pytest.approx((100 - y) / 1.5748 + 128)


class TestYuvPsnrPoint:
    def test_identical_sentinel(self):
        c = _random_cloud(40, 9)
        assert yuv_psnr_point(c, c) == INF_SENTINEL

    def test_uniform_gray_shift_matches_closed_form(self):
        n = 64
        base = np.stack([np.arange(n, dtype=float), np.zeros(n), np.zeros(n)], axis=1)
        gray = np.full((n, 3), 100, dtype=np.uint8)
        ref = _cloud(base, gray)
        dist = _cloud(base, gray + 8)
        psnr_y = 10 * math.log10(255**2 / 64.0)
        expected = (6 * psnr_y + CORRELATION_CAP_DB + CORRELATION_CAP_DB) / 8
        assert yuv_psnr_point(ref, dist) == pytest.approx(expected, abs=0.01)

    def test_matches_brute_force_on_small_clouds(self):
        rng = np.random.default_rng(10)
        n = 80
        ramp = np.linspace(0, 255, n).astype(np.uint8)
        ref = _cloud(rng.normal(size=(n, 3)), np.stack([ramp] * 3, axis=1))
        dist = _cloud(rng.normal(size=(n, 3)), np.full((n, 3), 77, dtype=np.uint8))

        def direction(src, dst):
            idx, _ = brute_force_nn(src.positions, dst.positions)
            a = rgb_to_yuv(src.colors)
            b = rgb_to_yuv(dst.colors)[idx]
            mses = np.mean((a - b) ** 2, axis=0)
            psnrs = [10 * math.log10(255**2 / m) if m > 0 else INF_SENTINEL for m in mses]
            finite = [min(p, CORRELATION_CAP_DB) for p in psnrs]
            return (6 * finite[0] + finite[1] + finite[2]) / 8

        expected = min(direction(ref, dist), direction(dist, ref))
        assert yuv_psnr_point(ref, dist) == pytest.approx(expected, abs=1e-9)


def _plane_cloud(n_side=16, seed=0):
    rng = np.random.default_rng(seed)
    g = np.linspace(0.0, 1.0, n_side)
    xx, yy = np.meshgrid(g, g)
    # gentle height field so the bbox has nonzero thickness and curvature
    zz = 0.05 * np.sin(2 * np.pi * xx)
    pos = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    colors = np.stack([np.clip(255 * xx.ravel(), 0, 255),
                       np.clip(255 * yy.ravel(), 0, 255),
                       np.full(n_side * n_side, 60.0)], axis=1).astype(np.uint8)
    return ColoredPointCloud(pos, colors)


class TestPcqm:
    def test_identical_is_zero(self):
        c = _plane_cloud()
        assert pcqm(c, c, PcqmParams(radius_factor=0.15)) == 0.0
        assert pcqm_psnr(c, c, PcqmParams(radius_factor=0.15)) == INF_SENTINEL

    def test_lightness_shift_drives_score(self):
        c = _plane_cloud()
        shifted = ColoredPointCloud(c.positions.copy(),
                                    np.clip(c.colors.astype(int) + 40, 0, 255).astype(np.uint8))
        params = PcqmParams(radius_factor=0.15)
        score = pcqm(c, shifted, params)
        assert score > 0.0
        only_curvature = PcqmParams(radius_factor=0.15,
                                    weights={"curvature": 1.0, "lightness": 0.0,
                                             "chroma": 0.0, "hue": 0.0})
        assert pcqm(c, shifted, only_curvature) == pytest.approx(0.0, abs=1e-12)

    def test_noise_amplitude_ordering(self):
        c = _plane_cloud()
        rng = np.random.default_rng(11)
        noise = rng.uniform(-1, 1, c.positions.shape)
        params = PcqmParams(radius_factor=0.15)
        scores = []
        for amp in (0.001, 0.01):
            dist = ColoredPointCloud(c.positions + amp * noise, c.colors.copy())
            scores.append(pcqm(c, dist, params))
        assert scores[1] > scores[0] > 0.0

    def test_small_neighborhoods_skip_curvature(self):
        # 4 far-apart points: every ball has one member, curvature skipped,
        # color features still pool
        pos = np.array([[0, 0, 0], [10, 0, 0], [0, 10, 0], [10, 10, 0]], float)
        colors = np.array([[0, 0, 0], [255, 255, 255], [30, 60, 90], [200, 100, 0]],
                          dtype=np.uint8)
        a = ColoredPointCloud(pos, colors)
        b = ColoredPointCloud(pos, colors[::-1].copy())
        score = pcqm(a, b, PcqmParams(radius_factor=0.001))
        assert 0.0 < score <= 1.0

    def test_psnr_mapping_closed_forms(self):
        assert pcqm_psnr_of(0.01) == pytest.approx(20.0)
        assert pcqm_psnr_of(0.1) == pytest.approx(10.0)

    def test_range(self):
        a = _plane_cloud(10, seed=1)
        b = ColoredPointCloud(a.positions + 0.3, 255 - a.colors)
        assert 0.0 <= pcqm(a, b, PcqmParams(radius_factor=0.2)) <= 1.0


def pcqm_psnr_of(p):
    return 10 * math.log10(1.0 / p)


class TestPooling:
    def test_sequence_stride(self):
        frames = [_random_cloud(20, s) for s in range(30)]
        result = sequence_metric(frames, frames, d1_psnr, stride=10)
        assert result.frame_indices == [0, 10, 20]
        assert result.pooled == INF_SENTINEL

    def test_static_content_stride_invariant(self):
        ref = [_random_cloud(30, 1)] * 20
        dist = [_random_cloud(30, 2)] * 20
        r1 = sequence_metric(ref, dist, d1_psnr, stride=1)
        r10 = sequence_metric(ref, dist, d1_psnr, stride=10)
        assert r1.pooled == pytest.approx(r10.pooled, abs=1e-12)

    def test_single_frame(self):
        ref = [_random_cloud(30, 3)]
        dist = [_random_cloud(30, 4)]
        result = sequence_metric(ref, dist, d1_psnr, stride=10)
        assert len(result.per_frame) == 1
        assert result.pooled == result.per_frame[0]

    def test_sentinels_excluded_from_mean(self):
        a = _random_cloud(20, 5)
        b = _cloud(a.positions + np.array([0, 0, 0.1]))
        ref = [a, a, a]
        dist = [a, b, a]
        result = sequence_metric(ref, dist, d1_psnr, stride=1)
        finite = [v for v in result.per_frame if math.isfinite(v)]
        assert result.pooled == pytest.approx(np.mean(finite))

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            sequence_metric([_random_cloud(5, 1)], [], d1_psnr)


class TestRigidInvariance:
    def test_translation_and_axis_rotation(self):
        rng = np.random.default_rng(12)
        a = _random_cloud(60, 13)
        b = _cloud(a.positions + rng.normal(0, 0.05, (60, 3)),
                   rng.integers(0, 256, (60, 3)).astype(np.uint8))
        base_d1 = d1_psnr(a, b)
        base_yuv = yuv_psnr_point(a, b)
        shift = np.array([3.0, -2.0, 11.0])
        perm = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)  # 90deg rotations
        for transform in (lambda p: p + shift, lambda p: p @ perm.T + shift):
            ta = _cloud(transform(a.positions), a.colors)
            tb = _cloud(transform(b.positions), b.colors)
            assert d1_psnr(ta, tb) == pytest.approx(base_d1, abs=1e-6)
            assert yuv_psnr_point(ta, tb) == pytest.approx(base_yuv, abs=1e-6)


class TestCapScores:
    def test_cap(self):
        capped = cap_scores([INF_SENTINEL, 42.0, INF_SENTINEL])
        assert capped.tolist() == [100.0, 42.0, 100.0]
