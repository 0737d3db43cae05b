"""Command-line pipeline: distort, sample, render, metric, mos, evaluate.

Every stage writes its outputs next to a provenance sidecar carrying a hash
of the inputs and parameters that produced them.  Re-running with the same
configuration skips finished work; re-running after a configuration change
fails with a stale-artifact error instead of silently mixing generations.

Exit codes: 0 success, 2 validation/configuration error, 3 external tool
failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import fixtures
from .distortion import DistortionSpec, ExternalToolError, apply_distortion
from .image_metrics import geo_psnr, ms_ssim, psnr_image, rgb_psnr, ssim, yuv_psnr_image
from .mesh_io import (MeshFormatError, TriangleMesh, compute_bbox, load_obj,
                      load_ply_pointcloud, load_texture, save_obj,
                      save_ply_pointcloud)
from .pointcloud_metrics import (PcqmParams, d1_hausdorff, d1_psnr, d2_hausdorff,
                                 d2_psnr, pcqm_psnr, yuv_psnr_point, _pool_mean)
from .render import camera_path, fibonacci_viewpoints, rasterize
from .rng import mix_seed
from .sampling import SamplerConfig, sample_mesh
from .subjective import RatingRecord, evaluate_metric, remove_outliers


class StaleArtifactError(ValueError):
    """Outputs on disk were produced by a different configuration."""


@dataclass
class SequenceEntry:
    name: str
    frame_pattern: str
    frames: int
    texture: str | None = None
    texture_pattern: str | None = None
    class_label: str = "A"
    fps: float = 30.0

    def frame_path(self, root: Path, i: int) -> Path:
        return root / (self.frame_pattern % i)

    def texture_path(self, root: Path, i: int) -> Path | None:
        if self.texture_pattern:
            return root / (self.texture_pattern % i)
        if self.texture:
            return root / self.texture
        return None


@dataclass
class DatasetManifest:
    root: Path
    sequences: list

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        data = json.loads(path.read_text())
        seqs = []
        for entry in data["sequences"]:
            seqs.append(SequenceEntry(
                name=entry["name"],
                frame_pattern=entry["frame_pattern"],
                frames=int(entry["frames"]),
                texture=entry.get("texture"),
                texture_pattern=entry.get("texture_pattern"),
                class_label=entry.get("class", "A"),
                fps=float(entry.get("fps", 30.0)),
            ))
            if seqs[-1].frames < 1:
                raise ValueError(f"sequence {seqs[-1].name}: frame count must be >= 1")
        return cls(root=path.parent, sequences=seqs)


@dataclass
class PipelineConfig:
    manifest: str
    output_dir: str
    seed: int = 0
    stride: int = 10
    viewpoints: int = 16
    view_size: tuple = (1024, 1024)
    pvs_size: tuple = (1920, 1080)
    render_views: bool = True
    render_pvs: bool = False
    distortions: list = field(default_factory=list)
    samplers: list = field(default_factory=lambda: [SamplerConfig("grid", 1024)])
    point_metrics: list = field(default_factory=lambda: ["d1", "d2", "d1_h", "d2_h",
                                                         "yuv_p", "pcqm_p"])
    image_metrics: list = field(default_factory=lambda: ["geo_psnr", "rgb_psnr",
                                                         "yuv_psnr"])
    video_metrics: list = field(default_factory=list)
    pcqm_radius_factor: float = 0.004
    jobs: int = 1

    @classmethod
    def load(cls, path, seed=None, stride=None, jobs=None) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text())
        cfg = cls(
            manifest=raw["manifest"],
            output_dir=raw["output_dir"],
            seed=int(raw.get("seed", 0)),
            stride=int(raw.get("stride", 10)),
            viewpoints=int(raw.get("viewpoints", 16)),
            view_size=tuple(raw.get("view_size", (1024, 1024))),
            pvs_size=tuple(raw.get("pvs_size", (1920, 1080))),
            render_views=bool(raw.get("render_views", True)),
            render_pvs=bool(raw.get("render_pvs", False)),
            distortions=[DistortionSpec(d["kind"], float(d["level"]))
                         for d in raw.get("distortions", [])],
            samplers=[SamplerConfig(s.get("method", "grid"),
                                    int(s.get("resolution", 1024)),
                                    float(s.get("area_threshold_factor", 1.0)))
                      for s in raw.get("samplers", [{"method": "grid",
                                                     "resolution": 1024}])],
            point_metrics=raw.get("point_metrics",
                                  ["d1", "d2", "d1_h", "d2_h", "yuv_p", "pcqm_p"]),
            image_metrics=raw.get("image_metrics", ["geo_psnr", "rgb_psnr", "yuv_psnr"]),
            video_metrics=raw.get("video_metrics", []),
            pcqm_radius_factor=float(raw.get("pcqm_radius_factor", 0.004)),
        )
        if seed is not None:
            cfg.seed = seed
        if stride is not None:
            cfg.stride = stride
        if jobs is not None:
            cfg.jobs = max(1, jobs)
        if cfg.stride < 1:
            raise ValueError("stride must be >= 1")
        # Resolve the manifest relative to the config file.
        cfg.manifest = str((Path(path).parent / cfg.manifest).resolve())
        cfg.output_dir = str((Path(path).parent / cfg.output_dir).resolve())
        return cfg


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _hash_bytes(*chunks) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.hexdigest()


def _hash_files(paths) -> str:
    h = hashlib.sha256()
    for p in sorted(str(p) for p in paths):
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def _provenance_gate(prov_path: Path, payload: dict) -> bool:
    """True when work can be skipped; raises on a stale sidecar."""
    digest = _hash_bytes(_canonical(payload).encode())
    if prov_path.exists():
        recorded = json.loads(prov_path.read_text())
        if recorded.get("hash") == digest:
            return True
        raise StaleArtifactError(
            f"{prov_path}: recorded provenance does not match the current "
            f"configuration (stale artifact tree; remove it to regenerate)"
        )
    return False


def _write_provenance(prov_path: Path, payload: dict) -> None:
    digest = _hash_bytes(_canonical(payload).encode())
    prov_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = prov_path.with_suffix(".tmp")
    tmp.write_text(json.dumps({"hash": digest, "inputs": payload},
                              sort_keys=True, indent=1))
    os.replace(tmp, prov_path)


def _save_png(arr: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.png")
    Image.fromarray(arr).save(tmp, format="PNG")
    os.replace(tmp, path)


def _load_frame(manifest: DatasetManifest, seq: SequenceEntry, i: int) -> TriangleMesh:
    tex_path = seq.texture_path(manifest.root, i)
    tex = load_texture(tex_path) if tex_path else None
    return load_obj(seq.frame_path(manifest.root, i), texture=tex)


def _variants(config: PipelineConfig):
    """All (label, spec) pairs including the undistorted reference."""
    out = [("ref", None)]
    for spec in config.distortions:
        out.append((spec.label(), spec))
    return out


def _strided(n: int, stride: int):
    return list(range(0, n, stride))


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def cmd_distort(config: PipelineConfig) -> None:
    """Write distorted frame meshes and textures plus provenance sidecars."""
    manifest = DatasetManifest.load(config.manifest)
    out_root = Path(config.output_dir) / "distorted"
    for si, seq in enumerate(manifest.sequences):
        frame_ids = _strided(seq.frames, config.stride)
        for di, spec in enumerate(config.distortions):
            dest = out_root / seq.name / spec.label()
            prov = dest / "provenance.json"
            inputs = [seq.frame_path(manifest.root, i) for i in frame_ids]
            tex0 = seq.texture_path(manifest.root, frame_ids[0])
            if tex0:
                inputs.append(tex0)
            payload = {
                "stage": "distort", "seed": config.seed, "sequence": seq.name,
                "spec": {"kind": spec.kind, "level": spec.level},
                "stride": config.stride, "inputs": _hash_files(inputs),
            }
            if _provenance_gate(prov, payload):
                continue
            dest.mkdir(parents=True, exist_ok=True)

            def one(i):
                mesh = _load_frame(manifest, seq, i)
                seeded = DistortionSpec(spec.kind, spec.level,
                                        seed=mix_seed(config.seed, si, di, i))
                distorted = apply_distortion(mesh, seeded)
                save_obj(distorted, dest / f"frame_{i:04d}.obj")
                if distorted.texture is not None:
                    _save_png(distorted.texture.pixels, dest / f"frame_{i:04d}.png")
                return i

            _map_jobs(one, frame_ids, config.jobs)
            _write_provenance(prov, payload)


def _iter_variant_frames(config: PipelineConfig, manifest: DatasetManifest,
                         seq: SequenceEntry, label: str, spec, frame_ids):
    """Yield (frame_id, mesh) for a reference or distorted variant."""
    if spec is None:
        for i in frame_ids:
            yield i, _load_frame(manifest, seq, i)
    else:
        dest = Path(config.output_dir) / "distorted" / seq.name / label
        for i in frame_ids:
            tex_file = dest / f"frame_{i:04d}.png"
            tex = load_texture(tex_file) if tex_file.exists() else None
            yield i, load_obj(dest / f"frame_{i:04d}.obj", texture=tex)


def cmd_sample(config: PipelineConfig) -> None:
    """Convert reference and distorted frames into point cloud PLY files."""
    manifest = DatasetManifest.load(config.manifest)
    out_root = Path(config.output_dir) / "clouds"
    for seq in manifest.sequences:
        frame_ids = _strided(seq.frames, config.stride)
        for label, spec in _variants(config):
            for sampler in config.samplers:
                sampler_tag = _sampler_tag(sampler)
                dest = out_root / seq.name / label / sampler_tag
                prov = dest / "provenance.json"
                payload = {
                    "stage": "sample", "sequence": seq.name, "variant": label,
                    "sampler": sampler_tag, "stride": config.stride,
                    "seed": config.seed,
                }
                if _provenance_gate(prov, payload):
                    continue
                dest.mkdir(parents=True, exist_ok=True)
                for i, mesh in _iter_variant_frames(config, manifest, seq, label,
                                                    spec, frame_ids):
                    cloud = sample_mesh(mesh, sampler)
                    save_ply_pointcloud(cloud, dest / f"frame_{i:04d}.ply")
                _write_provenance(prov, payload)


def _sampler_tag(s: SamplerConfig) -> str:
    if s.method == "sdiv":
        return f"sdiv_{s.area_threshold_factor:g}"
    return f"{s.method}_{s.resolution}"


def cmd_render(config: PipelineConfig) -> None:
    """Render viewpoint sets (color PNG + depth NPY) and optional video frames."""
    manifest = DatasetManifest.load(config.manifest)
    out_root = Path(config.output_dir)
    for seq in manifest.sequences:
        frame_ids = _strided(seq.frames, config.stride)
        ref0 = _load_frame(manifest, seq, frame_ids[0])
        bbox = compute_bbox(ref0)
        w, h = config.view_size
        cams = fibonacci_viewpoints(config.viewpoints, bbox, width=w, height=h)
        for label, spec in _variants(config):
            if config.render_views:
                dest = out_root / "views" / seq.name / label
                prov = dest / "provenance.json"
                payload = {"stage": "render_views", "sequence": seq.name,
                           "variant": label, "viewpoints": config.viewpoints,
                           "size": list(config.view_size), "stride": config.stride,
                           "seed": config.seed}
                if not _provenance_gate(prov, payload):
                    dest.mkdir(parents=True, exist_ok=True)
                    for i, mesh in _iter_variant_frames(config, manifest, seq, label,
                                                        spec, frame_ids):
                        def render_one(item):
                            vi, cam = item
                            view = rasterize(mesh, mesh.texture, cam)
                            _save_png(view.color,
                                      dest / f"frame_{i:04d}_view_{vi:02d}.png")
                            np.save(dest / f"frame_{i:04d}_view_{vi:02d}_depth.npy",
                                    view.depth)

                        _map_jobs(render_one, list(enumerate(cams)), config.jobs)
                    _write_provenance(prov, payload)
            if config.render_pvs:
                dest = out_root / "pvs" / seq.name / label
                prov = dest / "provenance.json"
                payload = {"stage": "render_pvs", "sequence": seq.name,
                           "variant": label, "size": list(config.pvs_size),
                           "fps": seq.fps, "seed": config.seed}
                if not _provenance_gate(prov, payload):
                    dest.mkdir(parents=True, exist_ok=True)
                    pw, ph = config.pvs_size
                    path_cams = camera_path(bbox, fps=int(seq.fps), width=pw, height=ph)
                    meshes = {i: m for i, m in _iter_variant_frames(
                        config, manifest, seq, label, spec, range(seq.frames))}

                    def render_frame(fi):
                        mesh = meshes[fi % seq.frames]
                        view = rasterize(mesh, mesh.texture, path_cams[fi])
                        _save_png(view.color, dest / f"frame_{fi:04d}.png")

                    _map_jobs(render_frame, range(len(path_cams)), config.jobs)
                    _write_provenance(prov, payload)


_POINT_METRICS = {
    "d1": d1_psnr, "d2": d2_psnr, "d1_h": d1_hausdorff, "d2_h": d2_hausdorff,
    "yuv_p": yuv_psnr_point,
}
_FRAME_METRICS = {"psnr": psnr_image, "ssim": ssim, "ms_ssim": ms_ssim}


def _load_views(dest: Path, frame_id: int, n_views: int):
    from .render import RenderedView

    views = []
    for vi in range(n_views):
        color = np.asarray(Image.open(dest / f"frame_{frame_id:04d}_view_{vi:02d}.png"))
        depth = np.load(dest / f"frame_{frame_id:04d}_view_{vi:02d}_depth.npy")
        views.append(RenderedView(color=color, depth=depth,
                                  mask=np.isfinite(depth)))
    return views


def cmd_metric(config: PipelineConfig) -> None:
    """Compute per-sample metrics from the sampled/rendered artifacts into
    metrics.csv (sample_id, metric, value)."""
    manifest = DatasetManifest.load(config.manifest)
    out_root = Path(config.output_dir)
    rows = []
    pcqm_params = PcqmParams(radius_factor=config.pcqm_radius_factor)
    for seq in manifest.sequences:
        frame_ids = _strided(seq.frames, config.stride)
        for label, spec in _variants(config):
            if spec is None:
                continue
            sample_id = f"{seq.name}__{label}"
            # point metrics on the first configured sampler
            if config.point_metrics and config.samplers:
                tag = _sampler_tag(config.samplers[0])
                ref_dir = out_root / "clouds" / seq.name / "ref" / tag
                dist_dir = out_root / "clouds" / seq.name / label / tag
                for name in config.point_metrics:
                    values = []
                    for i in frame_ids:
                        ref = load_ply_pointcloud(ref_dir / f"frame_{i:04d}.ply")
                        dist = load_ply_pointcloud(dist_dir / f"frame_{i:04d}.ply")
                        if name == "pcqm_p":
                            values.append(pcqm_psnr(ref, dist, pcqm_params))
                        else:
                            values.append(_POINT_METRICS[name](ref, dist))
                    rows.append((sample_id, name, _pool_mean(values)))
            if config.render_views and config.image_metrics:
                ref_dir = out_root / "views" / seq.name / "ref"
                dist_dir = out_root / "views" / seq.name / label
                per_metric = {name: [] for name in config.image_metrics}
                for i in frame_ids:
                    ref_views = _load_views(ref_dir, i, config.viewpoints)
                    dist_views = _load_views(dist_dir, i, config.viewpoints)
                    if "geo_psnr" in per_metric:
                        per_metric["geo_psnr"].append(geo_psnr(ref_views, dist_views))
                    if "rgb_psnr" in per_metric:
                        per_metric["rgb_psnr"].append(rgb_psnr(ref_views, dist_views))
                    if "yuv_psnr" in per_metric:
                        per_metric["yuv_psnr"].append(
                            yuv_psnr_image(ref_views, dist_views))
                for name, values in per_metric.items():
                    rows.append((sample_id, name, _pool_mean(values)))
            if config.render_pvs and config.video_metrics:
                ref_dir = out_root / "pvs" / seq.name / "ref"
                dist_dir = out_root / "pvs" / seq.name / label
                n_frames = len(sorted(ref_dir.glob("frame_*.png")))
                for name in config.video_metrics:
                    fn = _FRAME_METRICS[name]
                    values = []
                    for fi in range(0, n_frames, config.stride):
                        ra = np.asarray(Image.open(ref_dir / f"frame_{fi:04d}.png"))
                        da = np.asarray(Image.open(dist_dir / f"frame_{fi:04d}.png"))
                        values.append(fn(ra, da))
                    rows.append((sample_id, f"video_{name}", _pool_mean(values)))

    out_path = out_root / "metrics.csv"
    out_root.mkdir(parents=True, exist_ok=True)
    tmp = out_path.with_suffix(".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "metric", "value"])
        for sample_id, metric, value in rows:
            writer.writerow([sample_id, metric, f"{value:.10g}"])
    os.replace(tmp, out_path)


def read_ratings_csv(path):
    """Rating rows: viewer_id, subgroup, sample_id, score, flags.

    flags is empty, 'trap_low', 'dup:<pair id>', or both joined by ';'.
    """
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            flags = (row.get("flags") or "").strip()
            is_trap = False
            dup_id = None
            for flag in filter(None, (f.strip() for f in flags.split(";"))):
                if flag == "trap_low":
                    is_trap = True
                elif flag.startswith("dup:"):
                    dup_id = flag[4:]
                else:
                    raise ValueError(f"unknown rating flag {flag!r}")
            records.append(RatingRecord(
                viewer_id=row["viewer_id"], subgroup_id=row["subgroup"],
                sample_id=row["sample_id"], score=int(row["score"]),
                is_trap_low=is_trap, duplicate_pair_id=dup_id))
    return records


def cmd_mos(ratings_path, out_dir) -> None:
    """Screen raw ratings into mos.csv plus a screening log."""
    records = read_ratings_csv(ratings_path)
    table = remove_outliers(records)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "mos.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "mos", "valid_votes"])
        for s in table.samples():
            writer.writerow([s, f"{table.mos[s]:.6f}", table.counts[s]])
    log = {
        "rejected_viewer_subgroups": sorted(map(list, table.screening.rejected_pairs)),
        "dropped_viewers": sorted(table.screening.dropped_viewers),
        "viewer_correlations": {k: round(v, 6) for k, v in
                                sorted(table.screening.viewer_correlations.items())},
    }
    (out_dir / "screening_log.json").write_text(json.dumps(log, indent=1))


def _grouping_from_sample_id(sample_id: str):
    if "__" not in sample_id:
        return None
    seq, label = sample_id.split("__", 1)
    kind = label.split("_", 1)[0]
    return seq, kind


def cmd_evaluate(metrics_path, mos_path, out_dir) -> None:
    """Benchmark every metric in metrics.csv against mos.csv; writes
    report.json and a results-table CSV."""
    from .subjective import MosTable

    scores: dict = {}
    with open(metrics_path, newline="") as fh:
        for row in csv.DictReader(fh):
            scores.setdefault(row["metric"], {})[row["sample_id"]] = float(row["value"])
    mos = {}
    counts = {}
    with open(mos_path, newline="") as fh:
        for row in csv.DictReader(fh):
            mos[row["sample_id"]] = float(row["mos"])
            counts[row["sample_id"]] = int(row.get("valid_votes", 0))
    table = MosTable(mos=mos, counts=counts)

    sample_ids = set(mos)
    for per_sample in scores.values():
        sample_ids |= set(per_sample)
    grouping = {}
    for s in sample_ids:
        g = _grouping_from_sample_id(s)
        if g is not None:
            grouping[s] = g

    reports = []
    for metric_name in sorted(scores):
        reports.append(evaluate_metric(scores[metric_name], table,
                                       grouping=grouping, metric_name=metric_name))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps([r.to_dict() for r in reports], indent=1))

    sequences = sorted({g[0] for g in grouping.values()})
    kinds = sorted({g[1] for g in grouping.values()})
    with open(out_dir / "report_table.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "all_plcc", "all_srocc"]
                        + [f"seq_{s}_plcc" for s in sequences]
                        + [f"dist_{k}_plcc" for k in kinds])

        def cell(value):
            return "-" if value is None else f"{value:.4f}"

        for rep in reports:
            row = [rep.metric_name, cell(rep.overall.plcc), cell(rep.overall.srocc)]
            row += [cell(rep.per_sequence[s].plcc) if s in rep.per_sequence else "-"
                    for s in sequences]
            row += [cell(rep.per_distortion[k].plcc) if k in rep.per_distortion else "-"
                    for k in kinds]
            writer.writerow(row)


def cmd_make_fixtures(out_dir) -> None:
    """Materialize the bundled synthetic dataset (cube sequence + spheres)
    with a manifest, ready for the pipeline commands."""
    out_dir = Path(out_dir)
    (out_dir / "cube").mkdir(parents=True, exist_ok=True)
    seq = fixtures.make_cube_sequence(frames=3)
    for i, mesh in enumerate(seq.frames):
        save_obj(mesh, out_dir / "cube" / f"frame_{i:04d}.obj")
    _save_png(seq.frames[0].texture.pixels, out_dir / "cube" / "texture.png")
    sphere = fixtures.make_checker_sphere(texture=fixtures.smooth_texture())
    (out_dir / "sphere").mkdir(parents=True, exist_ok=True)
    save_obj(sphere, out_dir / "sphere" / "frame_0000.obj")
    _save_png(sphere.texture.pixels, out_dir / "sphere" / "texture.png")
    manifest = {
        "sequences": [
            {"name": "cube", "frame_pattern": "cube/frame_%04d.obj",
             "texture": "cube/texture.png", "frames": 3, "class": "A", "fps": 3},
            {"name": "sphere", "frame_pattern": "sphere/frame_%04d.obj",
             "texture": "sphere/texture.png", "frames": 1, "class": "A", "fps": 3},
        ]
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1))


def cmd_pipeline(config: PipelineConfig) -> None:
    cmd_distort(config)
    cmd_sample(config)
    cmd_render(config)
    cmd_metric(config)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dcmqa",
                                     description="Dynamic colored mesh quality toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_cmd(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--stride", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        return p

    add_config_cmd("distort", "generate distorted mesh/texture frames")
    add_config_cmd("sample", "sample meshes into point clouds")
    add_config_cmd("render", "render viewpoint sets and video frames")
    add_config_cmd("metric", "compute objective metrics into metrics.csv")
    add_config_cmd("pipeline", "distort, sample, render, and metric in order")

    p_mos = sub.add_parser("mos", help="screen ratings into mean opinion scores")
    p_mos.add_argument("ratings")
    p_mos.add_argument("--out", required=True)

    p_eval = sub.add_parser("evaluate", help="benchmark metrics against MOS")
    p_eval.add_argument("metrics_csv")
    p_eval.add_argument("mos_csv")
    p_eval.add_argument("--out", required=True)

    p_fix = sub.add_parser("make-fixtures", help="write the synthetic demo dataset")
    p_fix.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command in ("distort", "sample", "render", "metric", "pipeline"):
            config = PipelineConfig.load(args.config, seed=args.seed,
                                         stride=args.stride, jobs=args.jobs)
            {"distort": cmd_distort, "sample": cmd_sample, "render": cmd_render,
             "metric": cmd_metric, "pipeline": cmd_pipeline}[args.command](config)
        elif args.command == "mos":
            cmd_mos(args.ratings, args.out)
        elif args.command == "evaluate":
            cmd_evaluate(args.metrics_csv, args.mos_csv, args.out)
        elif args.command == "make-fixtures":
            cmd_make_fixtures(args.out)
    except ExternalToolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, MeshFormatError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
