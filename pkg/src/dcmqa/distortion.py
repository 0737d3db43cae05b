"""Reproducible distortion generators for textured meshes.

Four internal generators: impulse ("salt & pepper") color noise on the
texture, bicubic texture downsampling, uniform per-axis geometric noise
scaled by the smallest bounding-box extent, and quadric edge-collapse
decimation that respects UV seams.  Codec-based distortions are delegated
to external tools through a command-template hook.
"""

from __future__ import annotations

import heapq
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh_io import TextureMap, TriangleMesh, compute_bbox
from .rng import RandomSource

VALID_KINDS = ("CN", "DS", "GN", "MD", "ExternalCodec")


class DecimationStalledError(RuntimeError):
    """No further legal collapse exists before reaching the face target."""

    def __init__(self, achieved_faces: int, target_faces: int):
        super().__init__(
            f"decimation stalled at {achieved_faces} faces (target {target_faces})"
        )
        self.achieved_faces = achieved_faces
        self.target_faces = target_faces


class ExternalToolError(RuntimeError):
    """External codec invocation failed."""


@dataclass(frozen=True)
class DistortionSpec:
    """A distortion kind plus its level parameter and seed.

    level means: CN noise density in (0, 1]; DS resize ratio in (0, 1];
    GN noise ratio >= 0; MD target face count >= 4.
    """

    kind: str
    level: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ValueError(f"unknown distortion kind {self.kind!r}")
        if self.kind == "CN" and not (0.0 < self.level <= 1.0):
            raise ValueError("CN density must be in (0, 1]")
        if self.kind == "DS" and not (0.0 < self.level <= 1.0):
            raise ValueError("DS ratio must be in (0, 1]")
        if self.kind == "GN" and self.level < 0.0:
            raise ValueError("GN ratio must be >= 0")
        if self.kind == "MD" and self.level < 4:
            raise ValueError("MD target face count must be >= 4")

    def label(self) -> str:
        if self.kind == "MD":
            return f"MD_{int(self.level)}"
        return f"{self.kind}_{self.level:g}"


def apply_distortion(mesh: TriangleMesh, spec: DistortionSpec) -> TriangleMesh:
    """Apply one internal distortion to a mesh frame."""
    rng = RandomSource(spec.seed)
    if spec.kind == "CN":
        if mesh.texture is None:
            raise ValueError("CN requires a textured mesh")
        tex = apply_color_noise(mesh.texture, spec.level, rng)
        return TriangleMesh(mesh.positions, mesh.uvs, mesh.faces_pos, mesh.faces_uv, tex)
    if spec.kind == "DS":
        if mesh.texture is None:
            raise ValueError("DS requires a textured mesh")
        tex = downsample_texture(mesh.texture, spec.level)
        return TriangleMesh(mesh.positions, mesh.uvs, mesh.faces_pos, mesh.faces_uv, tex)
    if spec.kind == "GN":
        return apply_geometric_noise(mesh, spec.level, rng)
    if spec.kind == "MD":
        return decimate(mesh, int(spec.level))
    raise ValueError(f"{spec.kind} has no internal generator; use run_external_codec")


def apply_color_noise(tex: TextureMap, density: float, rng: RandomSource) -> TextureMap:
    """Impulse noise: each pixel independently becomes pure black or pure
    white with probability `density`, all three channels together."""
    if not (0.0 < density <= 1.0):
        raise ValueError("density must be in (0, 1]")
    h, w = tex.height, tex.width
    corrupt = rng.uniform((h, w)) < density
    white = rng.uniform((h, w)) < 0.5
    out = tex.pixels.copy()
    out[corrupt & white] = 255
    out[corrupt & ~white] = 0
    return TextureMap(out)


def _keys_kernel(x: np.ndarray) -> np.ndarray:
    # Cubic convolution kernel with a = -0.5.
    ax = np.abs(x)
    ax2 = ax * ax
    ax3 = ax2 * ax
    out = np.zeros_like(ax)
    near = ax <= 1.0
    far = (ax > 1.0) & (ax < 2.0)
    out[near] = 1.5 * ax3[near] - 2.5 * ax2[near] + 1.0
    out[far] = -0.5 * ax3[far] + 2.5 * ax2[far] - 4.0 * ax[far] + 2.0
    return out


def _resample_axis(data: np.ndarray, n_out: int) -> np.ndarray:
    """Cubic resampling of axis 0 from n_in to n_out rows.

    When shrinking, the kernel is stretched by the inverse scale so it acts
    as a low-pass filter.  Border taps clamp to the edge sample and weights
    are renormalized, which keeps constant inputs exactly constant.
    """
    n_in = data.shape[0]
    if n_out == n_in:
        return data.astype(np.float64)
    scale = n_out / n_in
    kscale = min(scale, 1.0)
    support = 2.0 / kscale
    out = np.empty((n_out,) + data.shape[1:], dtype=np.float64)
    src = (np.arange(n_out) + 0.5) / scale - 0.5
    for j in range(n_out):
        x = src[j]
        i0 = int(np.ceil(x - support))
        i1 = int(np.floor(x + support))
        idx = np.arange(i0, i1 + 1)
        wts = _keys_kernel((x - idx) * kscale)
        s = wts.sum()
        if s == 0.0:
            out[j] = data[min(max(int(round(x)), 0), n_in - 1)]
            continue
        wts = wts / s
        idx = np.clip(idx, 0, n_in - 1)
        out[j] = np.tensordot(wts, data[idx].astype(np.float64), axes=(0, 0))
    return out


def downsample_texture(tex: TextureMap, ratio: float) -> TextureMap:
    """Resize the texture by `ratio` in each direction with cubic
    interpolation (antialiased when shrinking); output dims round(dim*ratio),
    at least 1."""
    if not (0.0 < ratio <= 1.0):
        raise ValueError("ratio must be in (0, 1]")
    h, w = tex.height, tex.width
    nh = max(1, int(round(h * ratio)))
    nw = max(1, int(round(w * ratio)))
    if (nh, nw) == (h, w):
        return TextureMap(tex.pixels.copy())
    tmp = _resample_axis(tex.pixels, nh)
    tmp = np.swapaxes(_resample_axis(np.swapaxes(tmp, 0, 1), nw), 0, 1)
    return TextureMap(np.clip(np.rint(tmp), 0, 255).astype(np.uint8))


def geometric_noise_displacements(mesh: TriangleMesh, ratio: float,
                                  rng: RandomSource) -> np.ndarray:
    """Per-vertex displacement vectors: on each axis independently,
    sign * NR * ratio * MinBBlength with NR uniform in [0, 1] and a fair
    random sign.  Doubling `ratio` under the same seed exactly doubles
    every displacement."""
    if ratio < 0:
        raise ValueError("ratio must be >= 0")
    n = mesh.n_vertices
    nr = rng.uniform((n, 3))
    signs = rng.signs((n, 3))
    scale = ratio * compute_bbox(mesh).min_extent
    return (signs * nr) * scale


def apply_geometric_noise(mesh: TriangleMesh, ratio: float,
                          rng: RandomSource) -> TriangleMesh:
    """Displace vertex positions by geometric noise; connectivity, UVs, and
    texture are untouched."""
    disp = geometric_noise_displacements(mesh, ratio, rng)
    return TriangleMesh(mesh.positions + disp, mesh.uvs, mesh.faces_pos,
                        mesh.faces_uv, mesh.texture)


# --- quadric edge-collapse decimation ---------------------------------------


def _plane_quadric(a, b, c):
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        return np.zeros((3, 3)), np.zeros(3), 0.0
    n = n / norm
    d = -float(np.dot(n, a))
    return np.outer(n, n), d * n, d * d


def _quadric_cost(A, b, c, v):
    return float(v @ A @ v + 2.0 * b @ v + c)


def _place_vertex(A, b, p, q):
    """Quadric minimizer when the 3x3 system is well conditioned, else the
    edge midpoint."""
    try:
        cond = np.linalg.cond(A)
    except np.linalg.LinAlgError:
        cond = np.inf
    if np.isfinite(cond) and cond < 1e8:
        try:
            return np.linalg.solve(A, -b)
        except np.linalg.LinAlgError:
            pass
    return (p + q) / 2.0


def decimate(mesh: TriangleMesh, target_faces: int) -> TriangleMesh:
    """Quadric edge-collapse decimation preserving UV seams.

    Collapses the cheapest legal edge until the face count reaches the
    target (within the usual 2-face granularity).  Edges are never
    collapsed when they are non-manifold, lie on a UV seam, or when the
    collapse would create a zero-area face or flip a face normal beyond 90
    degrees.  Raises DecimationStalledError when no legal collapse remains.
    """
    if target_faces < 4:
        raise ValueError("target_faces must be >= 4")
    if target_faces >= mesh.n_faces:
        raise ValueError("target_faces must be below the current face count")

    positions = mesh.positions.copy()
    faces_pos = mesh.faces_pos.copy()
    faces_uv = mesh.faces_uv.copy()
    nf = faces_pos.shape[0]
    nv = positions.shape[0]
    alive = np.ones(nf, dtype=bool)
    version = np.zeros(nv, dtype=np.int64)

    vfaces: list[set] = [set() for _ in range(nv)]
    for f in range(nf):
        for v in faces_pos[f]:
            vfaces[v].add(f)

    quad_A = np.zeros((nv, 3, 3))
    quad_b = np.zeros((nv, 3))
    quad_c = np.zeros(nv)
    for f in range(nf):
        ia, ib, ic = faces_pos[f]
        A, b, c = _plane_quadric(positions[ia], positions[ib], positions[ic])
        for v in (ia, ib, ic):
            quad_A[v] += A
            quad_b[v] += b
            quad_c[v] += c

    def shared_faces(p, q):
        return sorted(g for g in vfaces[p] & vfaces[q] if alive[g])

    def is_seam(p, q, shared):
        if len(shared) != 2:
            return False
        f1, f2 = shared
        for v in (p, q):
            uv1 = faces_uv[f1][list(faces_pos[f1]).index(v)]
            uv2 = faces_uv[f2][list(faces_pos[f2]).index(v)]
            if uv1 != uv2:
                return True
        return False

    push_count = 0

    def edge_entry(p, q):
        nonlocal push_count
        A = quad_A[p] + quad_A[q]
        b = quad_b[p] + quad_b[q]
        c = quad_c[p] + quad_c[q]
        v = _place_vertex(A, b, positions[p], positions[q])
        cost = max(_quadric_cost(A, b, c, v), 0.0)
        push_count += 1
        return (cost, p, q, version[p], version[q], push_count, v)

    heap = []
    seen_edges = set()
    for f in range(nf):
        ia, ib, ic = faces_pos[f]
        for p, q in ((ia, ib), (ib, ic), (ic, ia)):
            key = (min(p, q), max(p, q))
            if key not in seen_edges:
                seen_edges.add(key)
                heapq.heappush(heap, edge_entry(*key))

    face_count = int(alive.sum())
    while face_count > target_faces:
        if not heap:
            raise DecimationStalledError(face_count, target_faces)
        cost, p, q, vp, vq, _, placed = heapq.heappop(heap)
        if version[p] != vp or version[q] != vq:
            continue
        shared = shared_faces(p, q)
        if not shared or len(shared) > 2:
            continue
        if is_seam(p, q, shared):
            continue

        # Reject collapses that flatten or flip any surviving face.
        ok = True
        touched = sorted((vfaces[p] | vfaces[q]) - set(shared))
        for g in touched:
            if not alive[g]:
                continue
            corners = [positions[v] for v in faces_pos[g]]
            after = [placed if v in (p, q) else positions[v] for v in faces_pos[g]]
            n_old = np.cross(corners[1] - corners[0], corners[2] - corners[0])
            n_new = np.cross(after[1] - after[0], after[2] - after[0])
            if np.linalg.norm(n_new) == 0.0 or float(np.dot(n_old, n_new)) < 0.0:
                ok = False
                break
        if not ok:
            continue

        # Surviving corner keeps the UV of the endpoint nearest the placement.
        winner = p if (np.linalg.norm(placed - positions[p])
                       <= np.linalg.norm(placed - positions[q])) else q
        f0 = shared[0]
        uv_winner = faces_uv[f0][list(faces_pos[f0]).index(winner)]
        wedge = set()
        for g in shared:
            row = list(faces_pos[g])
            wedge.add(faces_uv[g][row.index(p)])
            wedge.add(faces_uv[g][row.index(q)])

        for g in shared:
            alive[g] = False
            for v in faces_pos[g]:
                vfaces[v].discard(g)
        face_count -= len(shared)

        for g in sorted(touched):
            if not alive[g]:
                continue
            for k in range(3):
                if faces_pos[g][k] in (p, q):
                    faces_pos[g][k] = p
                    if faces_uv[g][k] in wedge:
                        faces_uv[g][k] = uv_winner
            vfaces[p].add(g)
        vfaces[q].clear()

        positions[p] = placed
        quad_A[p] += quad_A[q]
        quad_b[p] += quad_b[q]
        quad_c[p] += quad_c[q]
        version[p] += 1
        version[q] += 1

        neighbors = set()
        for g in vfaces[p]:
            for v in faces_pos[g]:
                if v != p:
                    neighbors.add(v)
        for r in sorted(neighbors):
            heapq.heappush(heap, edge_entry(min(p, r), max(p, r)))

    # Compact the surviving geometry.
    out_faces_pos = faces_pos[alive]
    out_faces_uv = faces_uv[alive]
    used_v = np.unique(out_faces_pos)
    vmap = np.full(nv, -1, dtype=np.int64)
    vmap[used_v] = np.arange(used_v.size)
    new_positions = positions[used_v]
    new_faces_pos = vmap[out_faces_pos]
    used_uv = np.unique(out_faces_uv[out_faces_uv >= 0]) if np.any(out_faces_uv >= 0) else np.array([], dtype=np.int64)
    if used_uv.size:
        umap = np.full(mesh.uvs.shape[0], -1, dtype=np.int64)
        umap[used_uv] = np.arange(used_uv.size)
        new_uvs = mesh.uvs[used_uv]
        new_faces_uv = np.where(out_faces_uv >= 0, umap[np.clip(out_faces_uv, 0, None)], -1)
    else:
        new_uvs = np.zeros((0, 2))
        new_faces_uv = out_faces_uv
    return TriangleMesh(new_positions, new_uvs, new_faces_pos, new_faces_uv, mesh.texture)


# --- external codec hook -----------------------------------------------------


def run_external_codec(template: str, in_path, out_path) -> list:
    """Run an external tool given a command template with {in} and {out}
    placeholders; returns the produced output paths.

    Raises ExternalToolError when the binary is missing, exits nonzero, or
    fails to produce the output; a template with unbound placeholders is a
    configuration error (ValueError).
    """
    cmd = template.replace("{in}", str(in_path)).replace("{out}", str(out_path))
    leftovers = [tok for tok in shlex.split(cmd) if "{" in tok and "}" in tok]
    if leftovers:
        raise ValueError(f"unbound placeholders in codec template: {leftovers}")
    try:
        proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True)
    except FileNotFoundError as exc:
        raise ExternalToolError(f"codec tool not found: {exc.filename}") from None
    if proc.returncode != 0:
        raise ExternalToolError(
            f"codec exited with {proc.returncode}: {proc.stderr.strip()[:500]}"
        )
    out = Path(out_path)
    if not out.exists():
        raise ExternalToolError(f"codec did not produce {out}")
    return [out]
