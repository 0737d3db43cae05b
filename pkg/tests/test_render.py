import math

import numpy as np
import pytest

from dcmqa.fixtures import make_checker_sphere, make_textured_cube, smooth_texture
from dcmqa.mesh_io import BoundingBox, TextureMap, TriangleMesh, compute_bbox
from dcmqa.render import (Camera, RenderedView, camera_path, fibonacci_viewpoints,
                          joint_depth_bounds, normalize_depth, rasterize)
from oracles import raycast_render_oracle

# frozen from the first verified run of the pairwise-angle enumeration
MIN_PAIRWISE_ANGLE_16 = 45.380150100555


def _unit_bbox():
    return BoundingBox(np.zeros(3), np.ones(3))


def _camera_directions(cams):
    dirs = np.array([np.array(c.eye) - np.array(c.target) for c in cams])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _facing_quad(half=10.0, z=0.0):
    pos = np.array([[-half, -half, z], [half, -half, z],
                    [half, half, z], [-half, half, z]])
    uv = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.float64)
    faces = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    return TriangleMesh(pos, uv, faces, faces.copy())


class TestFibonacciViewpoints:
    def test_unit_direction_norms(self):
        cams = fibonacci_viewpoints(16, _unit_bbox())
        dist = 1.5 * math.sqrt(3.0)
        for cam in cams:
            d = np.array(cam.eye) - np.array(cam.target)
            assert np.linalg.norm(d) == pytest.approx(dist, abs=1e-12)

    def test_sixteen_views_min_separation(self):
        cams = fibonacci_viewpoints(16, _unit_bbox())
        assert len(cams) == 16
        dirs = _camera_directions(cams)
        best = min(math.degrees(math.acos(np.clip(float(dirs[i] @ dirs[j]), -1, 1)))
                   for i in range(16) for j in range(i + 1, 16))
        assert best > 30.0
        assert best == pytest.approx(MIN_PAIRWISE_ANGLE_16, abs=1e-9)

    def test_single_view_looks_at_center(self):
        # z_0 = 1 - 2*0.5/1 = 0: the lattice's one direction is equatorial
        cams = fibonacci_viewpoints(1, _unit_bbox())
        assert len(cams) == 1
        d = _camera_directions(cams)[0]
        assert d[0] == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(cams[0].target, 0.5)

    def test_polar_up_flip(self):
        cams = fibonacci_viewpoints(64, _unit_bbox())
        for cam in cams:
            d = _camera_directions([cam])[0]
            expected = (1.0, 0.0, 0.0) if abs(d[1]) > 0.99 else (0.0, 1.0, 0.0)
            assert cam.up == expected

    def test_validation(self):
        with pytest.raises(ValueError):
            fibonacci_viewpoints(0, _unit_bbox())


class TestCameraPath:
    def test_frame_count_and_fixed_segments(self):
        cams = camera_path(_unit_bbox(), fps=30)
        assert len(cams) == 300
        assert cams[0] == cams[29]
        assert cams[0] == cams[150]
        assert cams[150] == cams[179]

    def test_ccw_cw_symmetry(self):
        cams = camera_path(_unit_bbox(), fps=30)
        for k in range(120):
            assert cams[30 + k] == cams[299 - k], k

    def test_full_rotation_returns_home(self):
        cams = camera_path(_unit_bbox(), fps=30)
        assert cams[299] == cams[0]  # cw orbit ends back at the start view
        # orbit keeps elevation and radius constant
        center = _unit_bbox().center
        for cam in cams:
            eye = np.array(cam.eye)
            assert eye[1] == pytest.approx(center[1])
            assert np.linalg.norm(eye - center) == pytest.approx(
                np.linalg.norm(np.array(cams[0].eye) - center), abs=1e-9)

    def test_small_fps(self):
        cams = camera_path(_unit_bbox(), fps=3)
        assert len(cams) == 30

    def test_validation(self):
        with pytest.raises(ValueError):
            camera_path(_unit_bbox(), fps=0)


class TestRasterize:
    def test_full_screen_solid_red(self):
        quad = _facing_quad()
        red = TextureMap(np.tile(np.array([255, 0, 0], np.uint8), (4, 4, 1)))
        quad = quad.with_texture(red)
        cam = Camera(eye=(0, 0, 5), target=(0, 0, 0), fov_deg=60,
                     width=24, height=24, near=0.01)
        view = rasterize(quad, red, cam)
        assert np.all(view.color == [255, 0, 0])
        assert view.mask.all()

    def test_z_buffer_front_wins(self):
        near_quad = _facing_quad(half=1.0, z=4.0)   # distance 1 from the eye
        far_pos = _facing_quad(half=1.0, z=3.0).positions
        pos = np.vstack([near_quad.positions, far_pos])
        uv = np.tile(near_quad.uvs, (2, 1))
        faces = np.vstack([near_quad.faces_pos, near_quad.faces_pos + 4])
        fuv = np.vstack([near_quad.faces_uv, near_quad.faces_uv + 4])
        mesh = TriangleMesh(pos, uv, faces, fuv)
        cam = Camera(eye=(0, 0, 5), target=(0, 0, 0), fov_deg=40,
                     width=32, height=32, near=0.01)
        view = rasterize(mesh, None, cam)
        finite = view.depth[np.isfinite(view.depth)]
        # the far quad (depth 2) is fully occluded; only interpolation ulps remain
        assert np.allclose(finite, 1.0, atol=1e-9)

    def test_repeat_render_bit_identical(self):
        sphere = make_checker_sphere()
        cam = fibonacci_viewpoints(4, compute_bbox(sphere), width=48, height=48)[2]
        a = rasterize(sphere, sphere.texture, cam)
        b = rasterize(sphere, sphere.texture, cam)
        assert np.array_equal(a.color, b.color)
        assert np.array_equal(a.depth, b.depth)

    def test_matches_raycast_oracle_cube(self):
        cube = make_textured_cube()
        cams = fibonacci_viewpoints(16, compute_bbox(cube), width=64, height=64)
        for ci in (0, 7, 13):
            view = rasterize(cube, cube.texture, cams[ci])
            oc, od = raycast_render_oracle(cube, cube.texture, cams[ci])
            assert np.array_equal(view.color, oc), f"camera {ci}"
            assert np.array_equal(view.depth, od), f"camera {ci}"

    def test_matches_raycast_oracle_sphere(self):
        sphere = make_checker_sphere(n_lat=8, n_lon=10, texture=smooth_texture(32))
        cam = fibonacci_viewpoints(4, compute_bbox(sphere), width=48, height=48)[1]
        view = rasterize(sphere, sphere.texture, cam)
        oc, od = raycast_render_oracle(sphere, sphere.texture, cam)
        assert np.array_equal(view.color, oc)
        assert np.array_equal(view.depth, od)

    def test_mask_matches_finite_depth(self):
        cube = make_textured_cube()
        cam = fibonacci_viewpoints(4, compute_bbox(cube), width=40, height=40)[0]
        view = rasterize(cube, cube.texture, cam)
        assert np.array_equal(view.mask, np.isfinite(view.depth))
        assert view.mask.any() and not view.mask.all()
        assert np.all(view.color[~view.mask] == [128, 128, 128])

    def test_mask_count_invariant_under_double_roll(self):
        cube = make_textured_cube()
        cam = fibonacci_viewpoints(4, compute_bbox(cube), width=40, height=40)[1]
        rolled = Camera(eye=cam.eye, target=cam.target,
                        up=tuple(-u for u in cam.up), fov_deg=cam.fov_deg,
                        width=cam.width, height=cam.height, near=cam.near, far=cam.far)
        rolled_back = Camera(eye=cam.eye, target=cam.target,
                             up=tuple(-u for u in rolled.up), fov_deg=cam.fov_deg,
                             width=cam.width, height=cam.height,
                             near=cam.near, far=cam.far)
        a = rasterize(cube, cube.texture, cam)
        b = rasterize(cube, cube.texture, rolled_back)
        assert a.mask.sum() == b.mask.sum()

    def test_convex_object_visible_from_all_fib_views(self):
        sphere = make_checker_sphere()
        for cam in fibonacci_viewpoints(16, compute_bbox(sphere), width=32, height=32):
            assert rasterize(sphere, sphere.texture, cam).mask.any()

    def test_camera_validation(self):
        with pytest.raises(ValueError):
            Camera(eye=(0, 0, 0), target=(0, 0, 0))
        with pytest.raises(ValueError):
            Camera(eye=(0, 0, 1), target=(0, 0, 0), fov_deg=200)
        with pytest.raises(ValueError):
            Camera(eye=(0, 0, 1), target=(0, 0, 0), near=0.0)


class TestNormalizeDepth:
    def _view(self, depth):
        depth = np.asarray(depth, dtype=np.float64)
        color = np.zeros(depth.shape + (3,), dtype=np.uint8)
        return RenderedView(color=color, depth=depth, mask=np.isfinite(depth))

    def test_constant_plane_maps_to_zero(self):
        view = self._view(np.full((4, 4), 7.0))
        assert np.all(normalize_depth(view) == 0)

    def test_two_planes_hit_extremes(self):
        depth = np.full((4, 4), 2.0)
        depth[:2] = 10.0
        codes = normalize_depth(self._view(depth))
        assert set(np.unique(codes)) == {0, 255}

    def test_background_is_255(self):
        depth = np.full((4, 4), np.inf)
        depth[0, 0] = 3.0
        depth[0, 1] = 5.0
        codes = normalize_depth(self._view(depth))
        assert codes[0, 0] == 0
        assert codes[0, 1] == 255
        assert np.all(codes[1:] == 255)

    def test_empty_view_all_255(self):
        view = self._view(np.full((3, 3), np.inf))
        assert np.all(normalize_depth(view) == 255)

    def test_joint_bounds_shared_scale(self):
        a = self._view(np.full((2, 2), 5.0))
        b = self._view(np.full((2, 2), 15.0))
        lo, hi = joint_depth_bounds(a, b)
        assert (lo, hi) == (5.0, 15.0)
        assert np.all(normalize_depth(a, lo, hi) == 0)
        assert np.all(normalize_depth(b, lo, hi) == 255)
