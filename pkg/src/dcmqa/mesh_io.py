"""Core geometric types and file I/O for textured triangle meshes.

Supported formats: a Wavefront OBJ subset (v / vt / f records, optional vn
ignored), PNG and binary PPM textures, and binary little-endian PLY for
colored point clouds.  Meshes are immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image


class MeshFormatError(ValueError):
    """Raised for malformed or unsupported mesh/texture/cloud files."""


@dataclass(frozen=True)
class TextureMap:
    """8-bit RGB texture image, row-major, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"texture must be (H, W, 3) with H, W >= 1, got {px.shape}")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box given by componentwise min/max corners."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        mn = np.asarray(self.min, dtype=np.float64)
        mx = np.asarray(self.max, dtype=np.float64)
        if mn.shape != (3,) or mx.shape != (3,):
            raise ValueError("bbox corners must be 3-vectors")
        if np.any(mn > mx):
            raise ValueError("bbox min must be <= max componentwise")
        object.__setattr__(self, "min", mn)
        object.__setattr__(self, "max", mx)

    @property
    def extents(self) -> np.ndarray:
        return self.max - self.min

    @property
    def min_extent(self) -> float:
        """Smallest extent among the three axes."""
        return float(np.min(self.extents))

    @property
    def max_extent(self) -> float:
        return float(np.max(self.extents))

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extents))

    @property
    def center(self) -> np.ndarray:
        return (self.min + self.max) / 2.0


@dataclass
class TriangleMesh:
    """Indexed triangle mesh with per-corner UV indices.

    positions: (V, 3) float64 vertex coordinates.
    uvs:       (T, 2) float64 texture coordinates, nominally in [0, 1];
               values outside are wrapped (repeat addressing) at lookup time.
    faces_pos: (F, 3) int32 position indices per corner.
    faces_uv:  (F, 3) int32 uv indices per corner, -1 where a corner has
               no texture coordinate.
    texture:   optional TextureMap.
    """

    positions: np.ndarray
    uvs: np.ndarray
    faces_pos: np.ndarray
    faces_uv: np.ndarray
    texture: TextureMap | None = None

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.uvs = np.ascontiguousarray(self.uvs, dtype=np.float64).reshape(-1, 2)
        self.faces_pos = np.ascontiguousarray(self.faces_pos, dtype=np.int32).reshape(-1, 3)
        self.faces_uv = np.ascontiguousarray(self.faces_uv, dtype=np.int32).reshape(-1, 3)
        validate_mesh(self)

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces_pos.shape[0]

    def with_texture(self, texture: TextureMap | None) -> "TriangleMesh":
        """Copy of the mesh bound to a texture (corners must carry UVs)."""
        if texture is not None and np.any(self.faces_uv < 0):
            raise MeshFormatError("cannot attach texture: some corners have no UV coordinate")
        return TriangleMesh(self.positions, self.uvs, self.faces_pos, self.faces_uv, texture)


@dataclass
class MeshSequence:
    """Ordered mesh frames at a nominal frame rate (30 Hz for typical content)."""

    frames: list = field(default_factory=list)
    fps: float = 30.0

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        sizes = {
            (f.texture.width, f.texture.height)
            for f in self.frames
            if f.texture is not None
        }
        if len(sizes) > 1:
            raise ValueError(f"frames reference textures of differing sizes: {sorted(sizes)}")

    def __len__(self) -> int:
        return len(self.frames)


def validate_mesh(mesh: TriangleMesh) -> None:
    """Check the structural invariants; raises MeshFormatError on violation."""
    if mesh.positions.shape[0] < 1:
        raise MeshFormatError("mesh has no vertices")
    if mesh.faces_pos.shape[0] < 1:
        raise MeshFormatError("mesh has no faces")
    if mesh.faces_pos.shape != mesh.faces_uv.shape:
        raise MeshFormatError("faces_pos and faces_uv must have matching shapes")
    if np.any(mesh.faces_pos < 0) or np.any(mesh.faces_pos >= mesh.positions.shape[0]):
        raise MeshFormatError("face position index out of range")
    if np.any(mesh.faces_uv >= mesh.uvs.shape[0]):
        raise MeshFormatError("face uv index out of range")
    if mesh.texture is not None and np.any(mesh.faces_uv < 0):
        raise MeshFormatError("textured mesh has corners without UV coordinates")


def compute_bbox(mesh_or_positions) -> BoundingBox:
    """Exact componentwise bounding box of a mesh or an (N, 3) array."""
    pts = getattr(mesh_or_positions, "positions", mesh_or_positions)
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise ValueError("cannot compute bounding box of empty geometry")
    return BoundingBox(pts.min(axis=0), pts.max(axis=0))


def _parse_corner(token: str, n_v: int, n_vt: int, lineno: int):
    parts = token.split("/")
    try:
        vi = int(parts[0])
        ti = int(parts[1]) if len(parts) > 1 and parts[1] != "" else 0
    except ValueError:
        raise MeshFormatError(f"line {lineno}: cannot parse face corner {token!r}") from None
    # OBJ negative indices count back from the current end of the array.
    if vi < 0:
        vi = n_v + vi + 1
    if ti < 0:
        ti = n_vt + ti + 1
    if vi < 1 or vi > n_v:
        raise MeshFormatError(f"line {lineno}: vertex index {parts[0]} out of range (have {n_v})")
    if ti != 0 and ti > n_vt:
        raise MeshFormatError(f"line {lineno}: uv index {parts[1]} out of range (have {n_vt})")
    return vi - 1, ti - 1  # 0-based; uv -1 means absent


def load_obj(path, texture: TextureMap | None = None) -> TriangleMesh:
    """Load an OBJ mesh (v/vt/f subset; vn and materials ignored).

    Polygons with more than three corners are fan-triangulated.  If a
    texture is supplied, every corner must carry a UV coordinate.
    """
    positions = []
    uvs = []
    faces_pos = []
    faces_uv = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            key = parts[0]
            try:
                if key == "v":
                    positions.append([float(parts[1]), float(parts[2]), float(parts[3])])
                elif key == "vt":
                    uvs.append([float(parts[1]), float(parts[2])])
                elif key == "f":
                    corners = [
                        _parse_corner(tok, len(positions), len(uvs), lineno)
                        for tok in parts[1:]
                    ]
                    if len(corners) < 3:
                        raise MeshFormatError(f"line {lineno}: face with fewer than 3 corners")
                    for k in range(1, len(corners) - 1):
                        tri = (corners[0], corners[k], corners[k + 1])
                        faces_pos.append([c[0] for c in tri])
                        faces_uv.append([c[1] for c in tri])
                # vn, o, g, s, usemtl, mtllib: ignored
            except (IndexError, ValueError) as exc:
                if isinstance(exc, MeshFormatError):
                    raise
                raise MeshFormatError(f"line {lineno}: malformed record {line!r}") from None
    if not positions:
        raise MeshFormatError(f"{path}: no vertices found")
    if not faces_pos:
        raise MeshFormatError(f"{path}: no faces found")
    mesh = TriangleMesh(
        np.array(positions, dtype=np.float64),
        np.array(uvs, dtype=np.float64).reshape(-1, 2),
        np.array(faces_pos, dtype=np.int32),
        np.array(faces_uv, dtype=np.int32),
    )
    if texture is not None:
        mesh = mesh.with_texture(texture)
    return mesh


def save_obj(mesh: TriangleMesh, path) -> None:
    """Write an OBJ file; float fields use %.17g so positions round-trip bit-exactly."""
    lines = []
    for p in mesh.positions:
        lines.append("v %.17g %.17g %.17g" % (p[0], p[1], p[2]))
    for t in mesh.uvs:
        lines.append("vt %.17g %.17g" % (t[0], t[1]))
    for fp, fu in zip(mesh.faces_pos, mesh.faces_uv):
        corners = []
        for vi, ti in zip(fp, fu):
            corners.append(f"{vi + 1}/{ti + 1}" if ti >= 0 else f"{vi + 1}")
        lines.append("f " + " ".join(corners))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_texture(path) -> TextureMap:
    """Load a PNG or binary PPM (P6) texture as 8-bit RGB.

    16-bit inputs are reduced to 8 bits by integer truncation (value >> 8).
    """
    path = Path(path)
    try:
        head = path.open("rb").read(2)
    except OSError as exc:
        raise MeshFormatError(f"{path}: cannot read texture: {exc}") from None
    if head == b"P6":
        return _load_ppm(path)
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise MeshFormatError(f"{path}: corrupt or unsupported image: {exc}") from None
    arr = np.asarray(img)
    if arr.dtype == np.uint16 or str(img.mode).startswith("I"):
        arr = (np.asarray(img, dtype=np.uint32) >> 8).astype(np.uint8)
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    if arr.shape[2] == 4:
        arr = arr[:, :, :3]
    return TextureMap(arr.astype(np.uint8))


def _load_ppm(path) -> TextureMap:
    data = path.read_bytes()
    # Header: magic, width, height, maxval; '#' comments allowed between tokens.
    tokens = []
    i = 2
    while len(tokens) < 3 and i < len(data):
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if i > start:
            tokens.append(data[start:i])
    i += 1  # single whitespace after maxval
    if len(tokens) < 3:
        raise MeshFormatError(f"{path}: truncated PPM header")
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise MeshFormatError(f"{path}: malformed PPM header") from None
    if width < 1 or height < 1 or maxval < 1 or maxval > 65535:
        raise MeshFormatError(f"{path}: invalid PPM dimensions or maxval")
    n = width * height * 3
    if maxval > 255:
        raw = data[i : i + 2 * n]
        if len(raw) < 2 * n:
            raise MeshFormatError(f"{path}: truncated PPM pixel data")
        px = np.frombuffer(raw, dtype=">u2").reshape(height, width, 3)
        px = (px >> 8).astype(np.uint8)
    else:
        raw = data[i : i + n]
        if len(raw) < n:
            raise MeshFormatError(f"{path}: truncated PPM pixel data")
        px = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3).copy()
    return TextureMap(px)


def save_ply_pointcloud(cloud, path) -> None:
    """Write a colored point cloud as binary little-endian PLY.

    Properties: x, y, z float32; red, green, blue uchar; nx, ny, nz float32
    when the cloud carries normals.
    """
    n = cloud.positions.shape[0]
    has_normals = cloud.normals is not None
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += ["property float x", "property float y", "property float z"]
    if has_normals:
        header += ["property float nx", "property float ny", "property float nz"]
    header += ["property uchar red", "property uchar green", "property uchar blue"]
    header += ["end_header"]

    pos = cloud.positions.astype("<f4")
    col = cloud.colors.astype(np.uint8)
    rows = []
    if has_normals:
        nrm = cloud.normals.astype("<f4")
        for k in range(n):
            rows.append(struct.pack("<6f3B", *pos[k], *nrm[k], *col[k]))
    else:
        for k in range(n):
            rows.append(struct.pack("<3f3B", *pos[k], *col[k]))
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(b"".join(rows))


def load_ply_pointcloud(path):
    """Read a binary little-endian PLY point cloud written by save_ply_pointcloud."""
    from .sampling import ColoredPointCloud

    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise MeshFormatError(f"{path}: not a PLY file")
    header = data[:end].decode("ascii").splitlines()
    body = data[end + len(b"end_header\n") :]
    n = 0
    props = []
    for line in header:
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n = int(parts[2])
        elif parts and parts[0] == "property":
            props.append((parts[1], parts[2]))
        elif parts[:2] == ["format", "binary_little_endian"]:
            pass
    names = [name for _, name in props]
    fmt = "<" + "".join("f" if kind == "float" else "B" for kind, _ in props)
    size = struct.calcsize(fmt)
    if len(body) < n * size:
        raise MeshFormatError(f"{path}: truncated PLY body")
    rows = [struct.unpack_from(fmt, body, k * size) for k in range(n)]
    arr = {name: np.array([r[j] for r in rows]) for j, name in enumerate(names)}
    positions = np.stack([arr["x"], arr["y"], arr["z"]], axis=1).astype(np.float64)
    colors = np.stack([arr["red"], arr["green"], arr["blue"]], axis=1).astype(np.uint8)
    normals = None
    if "nx" in arr:
        normals = np.stack([arr["nx"], arr["ny"], arr["nz"]], axis=1).astype(np.float64)
    return ColoredPointCloud(positions=positions, colors=colors, normals=normals,
                             source_face=np.zeros(n, dtype=np.int32))
