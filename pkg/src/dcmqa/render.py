"""Software rasterization of textured meshes.

Perspective projection with a z-buffer, top-left fill rule, and
perspective-correct barycentric interpolation of UVs; shading is unlit
albedo since the metrics downstream compare texture fidelity.  Two camera
generators are provided: a Fibonacci sphere lattice of viewpoints for image
metrics and a fixed/orbit/fixed/orbit path for video frame capture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh_io import BoundingBox, TextureMap, TriangleMesh
from .sampling import texture_lookup

BACKGROUND_RGB = (128, 128, 128)
UNTEXTURED_RGB = (255, 255, 255)


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: eye, look-at target, up hint, vertical fov, image size."""

    eye: tuple
    target: tuple
    up: tuple = (0.0, 1.0, 0.0)
    fov_deg: float = 45.0
    width: int = 1024
    height: int = 1024
    near: float = 1e-3
    far: float = 1e6

    def __post_init__(self):
        if tuple(self.eye) == tuple(self.target):
            raise ValueError("camera eye must differ from its target")
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError("fov must be in (0, 180) degrees")
        if self.near <= 0 or self.far <= self.near:
            raise ValueError("need 0 < near < far")
        object.__setattr__(self, "eye", tuple(float(x) for x in self.eye))
        object.__setattr__(self, "target", tuple(float(x) for x in self.target))
        object.__setattr__(self, "up", tuple(float(x) for x in self.up))

    def basis(self):
        """Right/up/forward unit vectors of the view frame."""
        eye = np.array(self.eye)
        fwd = np.array(self.target) - eye
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, np.array(self.up))
        nr = np.linalg.norm(right)
        if nr == 0.0:
            raise ValueError("camera up vector is parallel to the view direction")
        right = right / nr
        up = np.cross(right, fwd)
        return right, up, fwd


@dataclass
class RenderedView:
    """Color image, camera-space depth, and geometry coverage mask."""

    color: np.ndarray
    depth: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.color.shape[:2] != self.depth.shape or self.depth.shape != self.mask.shape:
            raise ValueError("color/depth/mask dimensions must agree")


def _fit_fov_deg(bbox: BoundingBox, distance: float, fill: float = 0.9) -> float:
    """Vertical fov that makes the bbox bounding sphere span `fill` of the
    image height at the given eye distance."""
    rho = bbox.diagonal / 2.0
    if rho == 0.0:
        return 45.0
    rho = min(rho, 0.999 * distance)
    half_tan = math.tan(math.asin(rho / distance)) / fill
    return math.degrees(2.0 * math.atan(half_tan))


def fibonacci_viewpoints(n: int, bbox: BoundingBox, width: int = 1024,
                         height: int = 1024) -> list:
    """n cameras on a Fibonacci sphere lattice around the bbox center.

    Eye distance is 1.5 bbox diagonals; fov auto-fits the bounding sphere
    to 90% of the image height.  The up hint flips to +x for near-polar
    directions.
    """
    if n < 1:
        raise ValueError("need at least one viewpoint")
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    center = bbox.center
    dist = 1.5 * bbox.diagonal if bbox.diagonal > 0 else 1.0
    fov = _fit_fov_deg(bbox, dist)
    cameras = []
    for i in range(n):
        z = 1.0 - 2.0 * (i + 0.5) / n
        r = math.sqrt(max(0.0, 1.0 - z * z))
        phi = 2.0 * math.pi * i * (2.0 - golden)
        d = np.array([r * math.cos(phi), r * math.sin(phi), z])
        up = (0.0, 1.0, 0.0) if abs(d[1]) <= 0.99 else (1.0, 0.0, 0.0)
        eye = center + d * dist
        cameras.append(Camera(eye=tuple(eye), target=tuple(center), up=up,
                              fov_deg=fov, width=width, height=height,
                              near=1e-3 * dist, far=1e3 * dist))
    return cameras


def camera_path(bbox: BoundingBox, fps: int = 30, duration: float = 10.0,
                width: int = 1920, height: int = 1080) -> list:
    """Video capture path: 1 s fixed at the start view, 4 s counterclockwise
    orbit, 1 s fixed, 4 s clockwise orbit back to the start.

    The orbit axis is the vertical (+y) line through the bbox center; the
    start view looks down -z from bbox-center height.  At 30 fps this gives
    the standard 300 frames.
    """
    if fps < 1:
        raise ValueError("fps must be >= 1")
    fps = int(fps)
    n_fix = fps
    n_orbit = 4 * fps
    total = int(round(fps * duration))
    if total != 2 * n_fix + 2 * n_orbit:
        raise ValueError("duration must cover the 1+4+1+4 second path")

    center = bbox.center
    dist = 1.5 * bbox.diagonal if bbox.diagonal > 0 else 1.0
    fov = _fit_fov_deg(bbox, dist)

    angles = []
    angles += [0.0] * n_fix
    angles += [k * (360.0 / n_orbit) for k in range(n_orbit)]
    angles += [0.0] * n_fix
    angles += [-(k + 1) * (360.0 / n_orbit) for k in range(n_orbit)]

    cameras = []
    for ang in angles:
        theta = math.radians(ang % 360.0)
        eye = center + dist * np.array([math.sin(theta), 0.0, math.cos(theta)])
        cameras.append(Camera(eye=tuple(eye), target=tuple(center), up=(0.0, 1.0, 0.0),
                              fov_deg=fov, width=width, height=height,
                              near=1e-3 * dist, far=1e3 * dist))
    return cameras


def _is_top_left(ax, ay, bx, by) -> bool:
    # Screen y grows downward; with positive-orientation winding, a boundary
    # pixel belongs to the triangle whose edge is a top or left edge.
    if ay == by:
        return bx < ax
    return by > ay


def rasterize(mesh: TriangleMesh, tex: TextureMap | None, camera: Camera) -> RenderedView:
    """Render one view; returns color, camera-space depth, and mask.

    Triangles with any vertex behind the near plane are skipped (cameras
    produced by this module keep geometry well in front).  Depth ties keep
    the earlier face, and boundary pixels follow the top-left rule so
    shared edges are painted exactly once.
    """
    w, h = camera.width, camera.height
    color = np.empty((h, w, 3), dtype=np.uint8)
    color[:, :] = BACKGROUND_RGB
    depth = np.full((h, w), np.inf)
    uv_num_u = np.zeros((h, w))
    uv_num_v = np.zeros((h, w))
    textured_buf = np.zeros((h, w), dtype=bool)
    face_buf = np.full((h, w), -1, dtype=np.int64)

    right, up, fwd = camera.basis()
    eye = np.array(camera.eye)
    tan_half = math.tan(math.radians(camera.fov_deg) / 2.0)
    aspect = w / h

    rel = mesh.positions - eye
    vx = rel[:, 0] * right[0] + rel[:, 1] * right[1] + rel[:, 2] * right[2]
    vy = rel[:, 0] * up[0] + rel[:, 1] * up[1] + rel[:, 2] * up[2]
    vz = rel[:, 0] * fwd[0] + rel[:, 1] * fwd[1] + rel[:, 2] * fwd[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = (vx / (vz * tan_half * aspect) + 1.0) * (w / 2.0)
        sy = (1.0 - vy / (vz * tan_half)) * (h / 2.0)

    has_uv = np.all(mesh.faces_uv >= 0, axis=1)
    zero_uv = np.zeros(2)
    for f in range(mesh.n_faces):
        ia, ib, ic = mesh.faces_pos[f]
        z0, z1, z2 = vz[ia], vz[ib], vz[ic]
        if z0 < camera.near or z1 < camera.near or z2 < camera.near:
            continue
        x0, y0 = sx[ia], sy[ia]
        x1, y1 = sx[ib], sy[ib]
        x2, y2 = sx[ic], sy[ic]
        if has_uv[f]:
            uv0, uv1, uv2 = mesh.uvs[mesh.faces_uv[f]]
        else:
            uv0 = uv1 = uv2 = zero_uv
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        if area < 0.0:
            # Reorder to positive orientation so one fill rule serves all.
            x1, y1, x2, y2 = x2, y2, x1, y1
            z1, z2 = z2, z1
            uv1, uv2 = uv2, uv1
            area = -area

        lo_x = max(int(math.floor(min(x0, x1, x2) - 0.5)), 0)
        hi_x = min(int(math.ceil(max(x0, x1, x2) - 0.5)), w - 1)
        lo_y = max(int(math.floor(min(y0, y1, y2) - 0.5)), 0)
        hi_y = min(int(math.ceil(max(y0, y1, y2) - 0.5)), h - 1)
        if lo_x > hi_x or lo_y > hi_y:
            continue

        xs = np.arange(lo_x, hi_x + 1) + 0.5
        ys = np.arange(lo_y, hi_y + 1) + 0.5
        px, py = np.meshgrid(xs, ys)

        e0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        e1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        e2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)

        inside = (
            ((e0 > 0.0) | ((e0 == 0.0) & _is_top_left(x1, y1, x2, y2)))
            & ((e1 > 0.0) | ((e1 == 0.0) & _is_top_left(x2, y2, x0, y0)))
            & ((e2 > 0.0) | ((e2 == 0.0) & _is_top_left(x0, y0, x1, y1)))
        )
        if not inside.any():
            continue

        l0 = e0 / area
        l1 = e1 / area
        l2 = e2 / area
        inv_z = l0 / z0 + l1 / z1 + l2 / z2
        with np.errstate(divide="ignore"):
            zview = 1.0 / inv_z

        win = depth[lo_y : hi_y + 1, lo_x : hi_x + 1]
        better = inside & (zview < win)
        if not better.any():
            continue

        if has_uv[f]:
            unum = (l0 * uv0[0] / z0 + l1 * uv1[0] / z1 + l2 * uv2[0] / z2) * zview
            vnum = (l0 * uv0[1] / z0 + l1 * uv1[1] / z1 + l2 * uv2[1] / z2) * zview
        else:
            unum = np.zeros_like(zview)
            vnum = np.zeros_like(zview)

        win[better] = zview[better]
        uv_num_u[lo_y : hi_y + 1, lo_x : hi_x + 1][better] = unum[better]
        uv_num_v[lo_y : hi_y + 1, lo_x : hi_x + 1][better] = vnum[better]
        textured_buf[lo_y : hi_y + 1, lo_x : hi_x + 1][better] = bool(has_uv[f])
        face_buf[lo_y : hi_y + 1, lo_x : hi_x + 1][better] = f

    mask = np.isfinite(depth)
    covered = mask & (face_buf >= 0)
    textured = covered & textured_buf
    if tex is not None and textured.any():
        uvs = np.stack([uv_num_u[textured], uv_num_v[textured]], axis=1)
        color[textured] = texture_lookup(uvs, tex).reshape(-1, 3)
    untextured = covered & ~textured if tex is not None else covered
    color[untextured] = UNTEXTURED_RGB
    return RenderedView(color=color, depth=depth, mask=mask)


def joint_depth_bounds(*views) -> tuple:
    """(lo, hi) over the finite depths of all given views; (inf, -inf) when
    nothing is covered."""
    lo = np.inf
    hi = -np.inf
    for view in views:
        finite = view.depth[np.isfinite(view.depth)]
        if finite.size:
            lo = min(lo, float(finite.min()))
            hi = max(hi, float(finite.max()))
    return lo, hi


def normalize_depth(view: RenderedView, lo: float | None = None,
                    hi: float | None = None) -> np.ndarray:
    """8-bit depth image: nearest finite depth maps to 0, farthest to 255,
    background to 255.  Pass shared (lo, hi) bounds to put a view pair on
    one scale; a degenerate range maps all foreground to 0."""
    if lo is None or hi is None:
        lo, hi = joint_depth_bounds(view)
    out = np.full(view.depth.shape, 255, dtype=np.uint8)
    finite = np.isfinite(view.depth)
    if not np.any(finite) or not np.isfinite(lo):
        return out
    if hi <= lo:
        out[finite] = 0
        return out
    scaled = (view.depth[finite] - lo) * (255.0 / (hi - lo))
    out[finite] = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    return out
