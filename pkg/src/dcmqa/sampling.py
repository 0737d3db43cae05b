"""Mesh-to-point-cloud conversion.

Four surface sampling strategies are provided: voxel-grid intersection,
per-face 2D lattice, recursive midpoint subdivision down to an edge-length
threshold, and recursive subdivision down to a face-area threshold.  All of
them attribute colors by bilinear texture lookup at the sample's
interpolated UV and reuse the source face normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import closest_point_on_triangle, face_normal, triangle_intersects_box
from .mesh_io import TextureMap, TriangleMesh, compute_bbox


class SubdivisionError(RuntimeError):
    """Raised when recursive subdivision cannot reach its threshold."""


_MAX_SUBDIV_DEPTH = 20


@dataclass
class ColoredPointCloud:
    """Point set with per-point color, optional normals, and face provenance."""

    positions: np.ndarray
    colors: np.ndarray
    normals: np.ndarray | None = None
    source_face: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = self.positions.shape[0]
        self.colors = np.ascontiguousarray(self.colors, dtype=np.uint8).reshape(-1, 3)
        if self.colors.shape[0] != n:
            raise ValueError("colors and positions must have the same length")
        if self.normals is not None:
            self.normals = np.ascontiguousarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if self.normals.shape[0] != n:
                raise ValueError("normals and positions must have the same length")
            norms = np.linalg.norm(self.normals, axis=1)
            if n and np.max(np.abs(norms - 1.0)) > 1e-6:
                raise ValueError("normals must be unit length within 1e-6")
        if self.source_face is None:
            self.source_face = np.zeros(n, dtype=np.int32)
        else:
            self.source_face = np.ascontiguousarray(self.source_face, dtype=np.int32).reshape(-1)
            if self.source_face.shape[0] != n:
                raise ValueError("source_face and positions must have the same length")

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class SamplerConfig:
    """Which sampler to run and at what density.

    method: one of "grid", "face", "ediv", "sdiv".
    resolution: integer density for grid/face/ediv (>= 1).
    area_threshold_factor: fraction of the mean input face area for sdiv (> 0).
    """

    method: str = "grid"
    resolution: int = 1024
    area_threshold_factor: float = 1.0

    def __post_init__(self):
        if self.method not in ("grid", "face", "ediv", "sdiv"):
            raise ValueError(f"unknown sampling method {self.method!r}")
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        if self.area_threshold_factor <= 0:
            raise ValueError("area_threshold_factor must be positive")


def sample_mesh(mesh: TriangleMesh, config: SamplerConfig) -> ColoredPointCloud:
    """Dispatch to the configured sampler."""
    tex = mesh.texture
    if config.method == "grid":
        return grid_sample(mesh, tex, config.resolution)
    if config.method == "face":
        return face_sample(mesh, tex, config.resolution)
    if config.method == "ediv":
        return ediv_sample(mesh, tex, config.resolution)
    return sdiv_sample(mesh, tex, config.area_threshold_factor)


def texture_lookup(uv, tex: TextureMap) -> np.ndarray:
    """Bilinear texture sample with repeat wrapping, returned as 8-bit RGB.

    The v axis is flipped (v=0 addresses the bottom texel row) and lookups
    happen in texel space, so uv=(0.5/W + k, 0.5/H) for any integer k hits
    the same texel center.
    """
    uv_in = np.asarray(uv, dtype=np.float64)
    single = uv_in.ndim == 1
    uv = uv_in.reshape(-1, 2)
    h, w = tex.height, tex.width
    x = uv[:, 0] * w - 0.5
    y = (1.0 - uv[:, 1]) * h - 0.5
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    xi0 = np.mod(x0, w)
    xi1 = np.mod(x0 + 1, w)
    yi0 = np.mod(y0, h)
    yi1 = np.mod(y0 + 1, h)
    px = tex.pixels.astype(np.float64)
    c00 = px[yi0, xi0]
    c10 = px[yi0, xi1]
    c01 = px[yi1, xi0]
    c11 = px[yi1, xi1]
    fx = fx[:, None]
    fy = fy[:, None]
    val = (c00 * (1 - fx) * (1 - fy) + c10 * fx * (1 - fy)
           + c01 * (1 - fx) * fy + c11 * fx * fy)
    result = np.clip(np.rint(val), 0, 255).astype(np.uint8)
    return result[0] if single else result


_GRAY = np.array([128, 128, 128], dtype=np.uint8)


def _corner_uvs(mesh: TriangleMesh, face: int) -> np.ndarray | None:
    fu = mesh.faces_uv[face]
    if np.any(fu < 0):
        return None
    return mesh.uvs[fu]


def _colors_for(uv_points: np.ndarray, tex: TextureMap | None) -> np.ndarray:
    n = uv_points.shape[0]
    if tex is None:
        return np.tile(_GRAY, (n, 1))
    return texture_lookup(uv_points, tex).reshape(n, 3)


def grid_sample(mesh: TriangleMesh, tex: TextureMap | None, resolution: int) -> ColoredPointCloud:
    """One sample per occupied cell of a cubic grid over the mesh bbox.

    Cell size is (max bbox extent) / resolution anchored at the bbox min
    corner.  For each cell a face overlaps, the candidate is the triangle
    point nearest the cell center; the lowest face index wins the cell.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    bbox = compute_bbox(mesh)
    cs = bbox.max_extent / resolution
    origin = bbox.min
    r = resolution

    # cell key -> (face, point, bary)
    occupied: dict[int, tuple[int, np.ndarray, tuple]] = {}

    if cs == 0.0:
        # Degenerate mesh (single point); a single cell captures everything.
        cs = 1.0

    half = cs / 2.0
    pos = mesh.positions
    for f in range(mesh.n_faces):
        ia, ib, ic = mesh.faces_pos[f]
        a, b, c = pos[ia], pos[ib], pos[ic]
        if np.linalg.norm(np.cross(b - a, c - a)) == 0.0:
            continue
        tmin = np.minimum(np.minimum(a, b), c)
        tmax = np.maximum(np.maximum(a, b), c)
        # Pad the index window by one cell so exact boundary touches are kept.
        lo = np.clip(np.floor((tmin - origin) / cs).astype(np.int64) - 1, 0, r - 1)
        hi = np.clip(np.floor((tmax - origin) / cs).astype(np.int64) + 1, 0, r - 1)
        for ix in range(lo[0], hi[0] + 1):
            for iy in range(lo[1], hi[1] + 1):
                for iz in range(lo[2], hi[2] + 1):
                    key = (ix * r + iy) * r + iz
                    prev = occupied.get(key)
                    if prev is not None and prev[0] <= f:
                        continue
                    center = origin + (np.array([ix, iy, iz], dtype=np.float64) + 0.5) * cs
                    if not triangle_intersects_box(a, b, c, center, half):
                        continue
                    point, bary = closest_point_on_triangle(center, a, b, c)
                    occupied[key] = (f, point, bary)

    keys = sorted(occupied)
    n = len(keys)
    positions = np.zeros((n, 3))
    normals = np.zeros((n, 3))
    faces = np.zeros(n, dtype=np.int32)
    uv_points = np.zeros((n, 2))
    has_uv = np.zeros(n, dtype=bool)
    for row, key in enumerate(keys):
        f, point, bary = occupied[key]
        positions[row] = point
        faces[row] = f
        ia, ib, ic = mesh.faces_pos[f]
        normals[row] = face_normal(pos[ia], pos[ib], pos[ic])
        cuv = _corner_uvs(mesh, f)
        if cuv is not None:
            uv_points[row] = bary[0] * cuv[0] + bary[1] * cuv[1] + bary[2] * cuv[2]
            has_uv[row] = True
    colors = np.tile(_GRAY, (n, 1))
    if tex is not None and np.any(has_uv):
        colors[has_uv] = texture_lookup(uv_points[has_uv], tex).reshape(-1, 3)
    return ColoredPointCloud(positions, colors, normals, faces)


def face_sample(mesh: TriangleMesh, tex: TextureMap | None, resolution: int) -> ColoredPointCloud:
    """Per-face barycentric lattice: A + (i/R)(B-A) + (j/R)(C-A), i+j <= R.

    Emits (R+1)(R+2)/2 points per non-degenerate face; shared corners of
    adjacent faces are emitted once per face.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    R = resolution
    ii, jj = np.meshgrid(np.arange(R + 1), np.arange(R + 1), indexing="ij")
    keep = (ii + jj) <= R
    si = (ii[keep] / R)[:, None]
    sj = (jj[keep] / R)[:, None]

    pos_chunks, uv_chunks, nrm_chunks, face_chunks = [], [], [], []
    pos = mesh.positions
    for f in range(mesh.n_faces):
        ia, ib, ic = mesh.faces_pos[f]
        a, b, c = pos[ia], pos[ib], pos[ic]
        n = face_normal(a, b, c)
        if not n.any():
            continue
        pts = a[None, :] + si * (b - a)[None, :] + sj * (c - a)[None, :]
        pos_chunks.append(pts)
        nrm_chunks.append(np.tile(n, (pts.shape[0], 1)))
        face_chunks.append(np.full(pts.shape[0], f, dtype=np.int32))
        cuv = _corner_uvs(mesh, f)
        if cuv is None:
            uv_chunks.append(None)
        else:
            uv_chunks.append(cuv[0][None, :] + si * (cuv[1] - cuv[0])[None, :]
                             + sj * (cuv[2] - cuv[0])[None, :])
    return _assemble(pos_chunks, uv_chunks, nrm_chunks, face_chunks, tex)


def _assemble(pos_chunks, uv_chunks, nrm_chunks, face_chunks, tex):
    if not pos_chunks:
        return ColoredPointCloud(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.uint8),
                                 np.zeros((0, 3)), np.zeros(0, dtype=np.int32))
    positions = np.concatenate(pos_chunks)
    normals = np.concatenate(nrm_chunks)
    faces = np.concatenate(face_chunks)
    colors = np.tile(_GRAY, (positions.shape[0], 1))
    if tex is not None:
        offset = 0
        for pts, uvp in zip(pos_chunks, uv_chunks):
            k = pts.shape[0]
            if uvp is not None:
                colors[offset : offset + k] = texture_lookup(uvp, tex).reshape(-1, 3)
            offset += k
    return ColoredPointCloud(positions, colors, normals, faces)


def _subdivide_face(a, b, c, uva, uvb, uvc, need_split, out_pos, out_uv, seen):
    """Depth-first midpoint 4-split; emits deduplicated leaf corners."""
    stack = [(a, b, c, uva, uvb, uvc, 0)]
    while stack:
        a, b, c, uva, uvb, uvc, depth = stack.pop()
        if need_split(a, b, c):
            if depth >= _MAX_SUBDIV_DEPTH:
                raise SubdivisionError("threshold unreachable: subdivision depth cap hit")
            mab = (a + b) / 2.0
            mbc = (b + c) / 2.0
            mca = (c + a) / 2.0
            uab = (uva + uvb) / 2.0
            ubc = (uvb + uvc) / 2.0
            uca = (uvc + uva) / 2.0
            d = depth + 1
            # Reversed so the (A,AB,CA) child is processed first.
            stack.append((mab, mbc, mca, uab, ubc, uca, d))
            stack.append((mca, mbc, c, uca, ubc, uvc, d))
            stack.append((mab, b, mbc, uab, uvb, ubc, d))
            stack.append((a, mab, mca, uva, uab, uca, d))
        else:
            for p, u in ((a, uva), (b, uvb), (c, uvc)):
                key = (p[0], p[1], p[2])
                if key not in seen:
                    seen.add(key)
                    out_pos.append(p)
                    out_uv.append(u)


def _subdivision_sample(mesh, tex, need_split_for_face) -> ColoredPointCloud:
    pos_chunks, uv_chunks, nrm_chunks, face_chunks = [], [], [], []
    pos = mesh.positions
    zero_uv = np.zeros(2)
    for f in range(mesh.n_faces):
        ia, ib, ic = mesh.faces_pos[f]
        a, b, c = pos[ia], pos[ib], pos[ic]
        n = face_normal(a, b, c)
        if not n.any():
            continue
        cuv = _corner_uvs(mesh, f)
        if cuv is None:
            uva = uvb = uvc = zero_uv
        else:
            uva, uvb, uvc = cuv[0], cuv[1], cuv[2]
        out_pos: list = []
        out_uv: list = []
        _subdivide_face(a, b, c, uva, uvb, uvc, need_split_for_face(f),
                        out_pos, out_uv, set())
        pts = np.array(out_pos)
        pos_chunks.append(pts)
        nrm_chunks.append(np.tile(n, (pts.shape[0], 1)))
        face_chunks.append(np.full(pts.shape[0], f, dtype=np.int32))
        uv_chunks.append(np.array(out_uv) if cuv is not None else None)
    return _assemble(pos_chunks, uv_chunks, nrm_chunks, face_chunks, tex)


def ediv_sample(mesh: TriangleMesh, tex: TextureMap | None, resolution: int) -> ColoredPointCloud:
    """Midpoint-subdivide each face until all edges are at most
    (max bbox extent) / resolution, then emit the refined vertices."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    threshold = compute_bbox(mesh).max_extent / resolution
    t2 = threshold * threshold

    def need_split_for_face(_f):
        def need_split(a, b, c):
            return max(
                float(np.dot(b - a, b - a)),
                float(np.dot(c - b, c - b)),
                float(np.dot(a - c, a - c)),
            ) > t2
        return need_split

    return _subdivision_sample(mesh, tex, need_split_for_face)


def sdiv_sample(mesh: TriangleMesh, tex: TextureMap | None,
                area_threshold_factor: float) -> ColoredPointCloud:
    """Midpoint-subdivide each face until sub-face areas are at most
    factor * (mean input face area), then emit the refined vertices."""
    if area_threshold_factor <= 0:
        raise ValueError("area_threshold_factor must be positive")
    pos = mesh.positions
    areas = []
    for f in range(mesh.n_faces):
        ia, ib, ic = mesh.faces_pos[f]
        areas.append(0.5 * np.linalg.norm(np.cross(pos[ib] - pos[ia], pos[ic] - pos[ia])))
    threshold = area_threshold_factor * float(np.mean(areas))

    def need_split_for_face(_f):
        def need_split(a, b, c):
            return 0.5 * float(np.linalg.norm(np.cross(b - a, c - a))) > threshold
        return need_split

    return _subdivision_sample(mesh, tex, need_split_for_face)
