import numpy as np
import pytest

from dcmqa.fixtures import checker_texture, make_textured_cube
from dcmqa.mesh_io import (BoundingBox, MeshFormatError, MeshSequence, TextureMap,
                           TriangleMesh, compute_bbox, load_obj,
                           load_ply_pointcloud, load_texture, save_obj,
                           save_ply_pointcloud)
from dcmqa.sampling import ColoredPointCloud

QUAD_OBJ = """\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vt 0 0
vt 1 0
vt 1 1
vt 0 1
f 1/1 2/2 3/3
f 1/1 3/3 4/4
"""


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadObj:
    def test_unit_quad_counts(self, tmp_path):
        mesh = load_obj(_write(tmp_path, "quad.obj", QUAD_OBJ))
        assert mesh.n_vertices == 4
        assert mesh.n_faces == 2
        assert mesh.uvs.shape == (4, 2)

    def test_quad_face_fan_triangulated(self, tmp_path):
        text = QUAD_OBJ.rsplit("f", 2)[0] + "f 1/1 2/2 3/3 4/4\n"
        mesh = load_obj(_write(tmp_path, "quad.obj", text))
        assert mesh.n_faces == 2
        assert mesh.faces_pos.tolist() == [[0, 1, 2], [0, 2, 3]]

    def test_out_of_range_uv_index_reports_line(self, tmp_path):
        text = QUAD_OBJ + "f 1/5 2/2 3/3\n"
        with pytest.raises(MeshFormatError, match="line 11"):
            load_obj(_write(tmp_path, "bad.obj", text))

    def test_out_of_range_vertex_index(self, tmp_path):
        with pytest.raises(MeshFormatError, match="out of range"):
            load_obj(_write(tmp_path, "bad.obj", "v 0 0 0\nf 1 2 3\n"))

    def test_malformed_vertex_reports_line(self, tmp_path):
        with pytest.raises(MeshFormatError, match="line 1"):
            load_obj(_write(tmp_path, "bad.obj", "v 0 zero 0\nf 1 1 1\n"))

    def test_negative_indices(self, tmp_path):
        text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n"
        mesh = load_obj(_write(tmp_path, "neg.obj", text))
        assert mesh.faces_pos.tolist() == [[0, 1, 2]]

    def test_vn_corners_ignored(self, tmp_path):
        text = ("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\n"
                "vn 0 0 1\nf 1/1/1 2/2/1 3/3/1\n")
        mesh = load_obj(_write(tmp_path, "n.obj", text))
        assert mesh.faces_uv.tolist() == [[0, 1, 2]]

    def test_texture_requires_uvs(self, tmp_path):
        text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
        path = _write(tmp_path, "plain.obj", text)
        assert load_obj(path).texture is None
        with pytest.raises(MeshFormatError, match="UV"):
            load_obj(path, texture=checker_texture(4))


class TestSaveObj:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        pos = rng.normal(size=(9, 3)) * np.pi
        uv = rng.random((5, 2))
        faces = rng.integers(0, 9, size=(7, 3)).astype(np.int32)
        fuv = rng.integers(0, 5, size=(7, 3)).astype(np.int32)
        mesh = TriangleMesh(pos, uv, faces, fuv)
        save_obj(mesh, tmp_path / "m.obj")
        back = load_obj(tmp_path / "m.obj")
        assert np.array_equal(back.positions, mesh.positions)
        assert np.array_equal(back.uvs, mesh.uvs)
        assert np.array_equal(back.faces_pos, mesh.faces_pos)
        assert np.array_equal(back.faces_uv, mesh.faces_uv)

    def test_round_trip_random_meshes(self, tmp_path):
        rng = np.random.default_rng(11)
        for trial in range(20):
            nv = int(rng.integers(3, 12))
            nf = int(rng.integers(1, 9))
            mesh = TriangleMesh(
                rng.normal(size=(nv, 3)) * 10.0 ** float(rng.integers(-3, 4)),
                rng.random((nv, 2)),
                rng.integers(0, nv, size=(nf, 3)).astype(np.int32),
                rng.integers(0, nv, size=(nf, 3)).astype(np.int32),
            )
            save_obj(mesh, tmp_path / f"m{trial}.obj")
            back = load_obj(tmp_path / f"m{trial}.obj")
            assert np.array_equal(back.positions, mesh.positions)
            assert np.array_equal(back.faces_pos, mesh.faces_pos)


class TestBoundingBox:
    def test_unit_cube(self):
        bb = compute_bbox(make_textured_cube())
        assert np.array_equal(bb.min, [0, 0, 0])
        assert np.array_equal(bb.max, [1, 1, 1])
        assert bb.min_extent == 1.0
        assert bb.diagonal == pytest.approx(np.sqrt(3.0))

    def test_single_vertex_degenerate(self):
        bb = compute_bbox(np.array([[2.0, 3.0, 4.0]]))
        assert np.array_equal(bb.min, bb.max)
        assert bb.min_extent == 0.0

    def test_anisotropic_min_extent(self):
        cube = make_textured_cube()
        stretched = cube.positions * np.array([5.0, 1.0, 1.0])
        bb = compute_bbox(stretched)
        assert bb.min_extent == 1.0
        assert bb.max_extent == 5.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(40, 3))
        bb1 = compute_bbox(pts)
        bb2 = compute_bbox(pts[rng.permutation(40)])
        assert np.array_equal(bb1.min, bb2.min)
        assert np.array_equal(bb1.max, bb2.max)

    def test_invalid_corners_rejected(self):
        with pytest.raises(ValueError):
            BoundingBox(np.array([1.0, 0, 0]), np.array([0.0, 1, 1]))


class TestFanTriangulation:
    def test_planar_polygon_area_preserved(self, tmp_path):
        rng = np.random.default_rng(9)
        for trial in range(10):
            k = int(rng.integers(4, 9))
            angles = np.sort(rng.uniform(0, 2 * np.pi, k))
            ax, bx = rng.uniform(0.5, 2.0, 2)
            # Ellipse points at sorted angles give a convex polygon, so the
            # fan from any vertex tiles it without overlap.
            poly2d = np.stack([ax * np.cos(angles), bx * np.sin(angles)], axis=1)
            shoelace = 0.5 * abs(sum(
                poly2d[i, 0] * poly2d[(i + 1) % k, 1] - poly2d[(i + 1) % k, 0] * poly2d[i, 1]
                for i in range(k)))
            lines = [f"v {x:.17g} {y:.17g} 0" for x, y in poly2d]
            lines.append("f " + " ".join(str(i + 1) for i in range(k)))
            mesh = load_obj(_write(tmp_path, f"poly{trial}.obj", "\n".join(lines) + "\n"))
            total = 0.0
            for fp in mesh.faces_pos:
                a, b, c = mesh.positions[fp]
                total += 0.5 * np.linalg.norm(np.cross(b - a, c - a))
            assert total == pytest.approx(shoelace, rel=1e-9)


class TestTexture:
    def test_ppm_white(self, tmp_path):
        p = tmp_path / "w.ppm"
        p.write_bytes(b"P6\n2 2\n255\n" + b"\xff" * 12)
        tex = load_texture(p)
        assert (tex.width, tex.height) == (2, 2)
        assert np.all(tex.pixels == 255)

    def test_ppm_16bit_truncates(self, tmp_path):
        p = tmp_path / "deep.ppm"
        vals = np.array([[[513, 65535, 0], [256, 255, 1]]], dtype=">u2")
        p.write_bytes(b"P6\n2 1\n65535\n" + vals.tobytes())
        tex = load_texture(p)
        assert tex.pixels[0, 0].tolist() == [2, 255, 0]
        assert tex.pixels[0, 1].tolist() == [1, 0, 0]

    def test_png_round_trip(self, tmp_path):
        from PIL import Image

        rng = np.random.default_rng(2)
        px = rng.integers(0, 256, (5, 7, 3)).astype(np.uint8)
        Image.fromarray(px).save(tmp_path / "t.png")
        tex = load_texture(tmp_path / "t.png")
        assert (tex.width, tex.height) == (7, 5)
        assert np.array_equal(tex.pixels, px)

    def test_truncated_ppm_fails(self, tmp_path):
        p = tmp_path / "bad.ppm"
        p.write_bytes(b"P6\n4 4\n255\n\x00\x01")
        with pytest.raises(MeshFormatError, match="truncated"):
            load_texture(p)

    def test_corrupt_png_fails(self, tmp_path):
        p = tmp_path / "bad.png"
        p.write_bytes(b"\x89PNG\r\n\x1a\n garbage")
        with pytest.raises(MeshFormatError):
            load_texture(p)

    def test_dimension_invariants(self):
        with pytest.raises(ValueError):
            TextureMap(np.zeros((0, 4, 3), dtype=np.uint8))


class TestPly:
    def test_header_and_round_trip(self, tmp_path):
        cloud = ColoredPointCloud(
            positions=np.array([[0, 0, 0], [1, 0, 0], [0.5, 1, 0.25]]),
            colors=np.array([[255, 0, 0], [0, 255, 0], [0, 0, 255]], dtype=np.uint8),
        )
        save_ply_pointcloud(cloud, tmp_path / "c.ply")
        raw = (tmp_path / "c.ply").read_bytes()
        assert b"element vertex 3" in raw
        assert b"nx" not in raw
        back = load_ply_pointcloud(tmp_path / "c.ply")
        assert np.array_equal(back.colors, cloud.colors)
        assert np.allclose(back.positions, cloud.positions, atol=1e-6)

    def test_normals_written(self, tmp_path):
        cloud = ColoredPointCloud(
            positions=np.zeros((2, 3)),
            colors=np.zeros((2, 3), dtype=np.uint8),
            normals=np.tile([0.0, 0.0, 1.0], (2, 1)),
        )
        save_ply_pointcloud(cloud, tmp_path / "n.ply")
        header = (tmp_path / "n.ply").read_bytes().split(b"end_header")[0]
        for prop in (b"property float nx", b"property float ny", b"property float nz"):
            assert prop in header
        back = load_ply_pointcloud(tmp_path / "n.ply")
        assert np.allclose(back.normals, cloud.normals)


class TestMeshInvariants:
    def test_face_index_out_of_range(self):
        with pytest.raises(MeshFormatError):
            TriangleMesh(np.zeros((2, 3)), np.zeros((1, 2)),
                         np.array([[0, 1, 2]]), np.array([[0, 0, 0]]))

    def test_empty_mesh_rejected(self):
        with pytest.raises(MeshFormatError):
            TriangleMesh(np.zeros((0, 3)), np.zeros((0, 2)),
                         np.zeros((0, 3), dtype=np.int32), np.zeros((0, 3), dtype=np.int32))

    def test_sequence_texture_sizes_must_match(self):
        a = make_textured_cube(texture=checker_texture(8))
        b = make_textured_cube(texture=checker_texture(16))
        with pytest.raises(ValueError, match="differing sizes"):
            MeshSequence(frames=[a, b])
        MeshSequence(frames=[a, a])

    def test_sequence_fps_positive(self):
        with pytest.raises(ValueError):
            MeshSequence(frames=[], fps=0)
