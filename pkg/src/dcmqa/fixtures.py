"""Synthetic textured meshes used by the tests, the docs, and the demo
pipeline, so nothing requires downloading a capture dataset."""

from __future__ import annotations

import math

import numpy as np

from .mesh_io import MeshSequence, TextureMap, TriangleMesh


def checker_texture(size: int = 64, cells: int = 8,
                    dark=(30, 30, 30), light=(230, 230, 230)) -> TextureMap:
    """Square checkerboard texture."""
    idx = np.arange(size) * cells // size
    board = (idx[:, None] + idx[None, :]) % 2
    px = np.where(board[..., None] == 0, np.array(dark, dtype=np.uint8),
                  np.array(light, dtype=np.uint8))
    return TextureMap(px.astype(np.uint8))


def smooth_texture(size: int = 64) -> TextureMap:
    """Smooth colorful gradient; downsamples gracefully (no aliasing traps)."""
    x = np.arange(size) / size
    y = np.arange(size) / size
    xx, yy = np.meshgrid(x, y)
    r = 127.5 + 127.0 * np.sin(2 * math.pi * xx)
    g = 255.0 * yy
    b = 127.5 + 127.0 * np.cos(2 * math.pi * (xx + yy))
    px = np.stack([r, g, b], axis=-1)
    return TextureMap(np.clip(np.rint(px), 0, 255).astype(np.uint8))


def gradient_texture(width: int = 64, height: int = 64) -> TextureMap:
    """Horizontal grayscale ramp."""
    row = np.linspace(0, 255, width)
    px = np.tile(row[None, :, None], (height, 1, 3))
    return TextureMap(np.rint(px).astype(np.uint8))


def make_textured_cube(size: float = 1.0, texture: TextureMap | None = None) -> TriangleMesh:
    """Axis-aligned cube with 12 faces; each side maps to its own cell of a
    3x2 UV atlas (the two triangles of a side share UVs, side borders are
    seams)."""
    s = size
    corners = np.array([
        [0, 0, 0], [s, 0, 0], [s, s, 0], [0, s, 0],
        [0, 0, s], [s, 0, s], [s, s, s], [0, s, s],
    ], dtype=np.float64)
    # Quads as position-index loops, one per side.
    quads = [
        (0, 3, 2, 1),  # z = 0
        (4, 5, 6, 7),  # z = s
        (0, 1, 5, 4),  # y = 0
        (2, 3, 7, 6),  # y = s
        (0, 4, 7, 3),  # x = 0
        (1, 2, 6, 5),  # x = s
    ]
    uvs = []
    faces_pos = []
    faces_uv = []
    for k, quad in enumerate(quads):
        cx, cy = k % 3, k // 3
        u0, u1 = cx / 3.0, (cx + 1) / 3.0
        v0, v1 = cy / 2.0, (cy + 1) / 2.0
        base = len(uvs)
        uvs += [[u0, v0], [u1, v0], [u1, v1], [u0, v1]]
        a, b, c, d = quad
        faces_pos += [[a, b, c], [a, c, d]]
        faces_uv += [[base, base + 1, base + 2], [base, base + 2, base + 3]]
    tex = texture if texture is not None else checker_texture()
    return TriangleMesh(corners, np.array(uvs), np.array(faces_pos),
                        np.array(faces_uv), tex)


def make_icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriangleMesh:
    """Untextured icosphere with 20 * 4**subdivisions faces."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=np.float64) for v in verts]
    cache: dict = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in cache:
            cache[key] = len(verts)
            verts.append((verts[i] + verts[j]) / 2.0)
        return cache[key]

    for _ in range(subdivisions):
        new_faces = []
        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = new_faces

    positions = np.array(verts)
    positions = positions / np.linalg.norm(positions, axis=1, keepdims=True) * radius
    faces_pos = np.array(faces, dtype=np.int32)
    faces_uv = np.full_like(faces_pos, -1)
    return TriangleMesh(positions, np.zeros((0, 2)), faces_pos, faces_uv)


def make_checker_sphere(n_lat: int = 12, n_lon: int = 18, radius: float = 1.0,
                        texture: TextureMap | None = None) -> TriangleMesh:
    """Textured UV sphere; continuous UVs except for the wrap meridian."""
    pole_top = 0
    ring_base = 1
    positions = [np.array([0.0, radius, 0.0])]
    for i in range(1, n_lat):
        theta = math.pi * i / n_lat
        for j in range(n_lon):
            phi = 2.0 * math.pi * j / n_lon
            positions.append(radius * np.array([
                math.sin(theta) * math.cos(phi),
                math.cos(theta),
                math.sin(theta) * math.sin(phi),
            ]))
    pole_bottom = len(positions)
    positions.append(np.array([0.0, -radius, 0.0]))

    def pos_index(i, j):
        if i == 0:
            return pole_top
        if i == n_lat:
            return pole_bottom
        return ring_base + (i - 1) * n_lon + (j % n_lon)

    def uv_index(i, j):
        return i * (n_lon + 1) + j

    uvs = []
    for i in range(n_lat + 1):
        for j in range(n_lon + 1):
            uvs.append([j / n_lon, 1.0 - i / n_lat])

    faces_pos = []
    faces_uv = []
    for i in range(n_lat):
        for j in range(n_lon):
            a, b = pos_index(i, j), pos_index(i + 1, j)
            c, d = pos_index(i + 1, j + 1), pos_index(i, j + 1)
            ua, ub = uv_index(i, j), uv_index(i + 1, j)
            uc, ud = uv_index(i + 1, j + 1), uv_index(i, j + 1)
            if i == 0:
                faces_pos.append([a, b, c])
                faces_uv.append([ua, ub, uc])
            elif i == n_lat - 1:
                faces_pos.append([a, b, d])
                faces_uv.append([ua, ub, ud])
            else:
                faces_pos.append([a, b, c])
                faces_uv.append([ua, ub, uc])
                faces_pos.append([a, c, d])
                faces_uv.append([ua, uc, ud])
    tex = texture if texture is not None else checker_texture()
    return TriangleMesh(np.array(positions), np.array(uvs),
                        np.array(faces_pos, dtype=np.int32),
                        np.array(faces_uv, dtype=np.int32), tex)


def make_cube_sequence(frames: int = 3, fps: float = 30.0,
                       texture: TextureMap | None = None) -> MeshSequence:
    """Short sequence of the textured cube sliding along +x."""
    tex = texture if texture is not None else checker_texture()
    out = []
    base = make_textured_cube(texture=tex)
    for t in range(frames):
        shift = np.array([0.05 * t, 0.0, 0.0])
        out.append(TriangleMesh(base.positions + shift, base.uvs,
                                base.faces_pos, base.faces_uv, tex))
    return MeshSequence(frames=out, fps=fps)
