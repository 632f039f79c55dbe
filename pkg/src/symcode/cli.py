"""Command line pipeline: classify, encode, render, solve, eval, serve.

All commands are reproducible: the same inputs give byte-identical outputs,
and content hashes are printed so reruns can be compared. Exit codes:
0 success, 1 configuration problems, 2 data problems.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import figures
from .config import ProjectConfig, load_config, setup_logging
from .encoding import (content_hash, encode_mesh_one_to_one,
                       encode_mesh_symcode, load_encoding, save_encoding)
from .errors import (ConfigMismatch, InvalidBits, NoConsensus, OrbitMismatch,
                     ParseError, SymcodeError)
from .geometry import CameraIntrinsics, Pose
from .mesh import load_mesh, load_part_labels, object_diameter
from .metrics import (MetricConfig, ar_scores, load_results_csv, mspd, mssd,
                      sample_points, vsd_error, vsd_recall, write_report)
from .render import (LabelMaps, read_code_map, read_depth_raw, read_mask_pgm,
                     render_depth, render_labels, write_code_map,
                     write_depth_raw, write_mask_pgm)
from .solvers import decode_map_to_correspondences, ransac_pnp
from .symmetry import SymmetryAnnotation, classify_vertices, load_annotation

EXIT_CONFIG = 1
EXIT_DATA = 2


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Translate exceptions into the CLI exit-code contract."""
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OrbitMismatch as exc:
            _fail(EXIT_DATA, f"vertex {exc.vertex_index}: {exc}")
        except (ConfigMismatch, InvalidBits) as exc:
            _fail(EXIT_CONFIG, str(exc))
        except (ParseError, SymcodeError, OSError, ValueError) as exc:
            _fail(EXIT_DATA, str(exc))
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _load_project(config_path, seed=None, bits=None, threshold=None):
    overrides = {"seed": seed, "d": bits, "classify_threshold": threshold}
    try:
        cfg = load_config(config_path, **overrides)
    except ParseError as exc:
        # a broken config file is a configuration problem, not a data problem
        _fail(EXIT_CONFIG, str(exc))
    return cfg


def _load_inputs(cfg: ProjectConfig):
    mesh = load_mesh(cfg.mesh)
    if cfg.parts:
        mesh = load_part_labels(mesh, cfg.parts)
    # a configured but not-yet-saved annotation file means "no symmetries",
    # matching what the service session starts from
    if cfg.annotation and Path(cfg.annotation).exists():
        annotation = load_annotation(cfg.annotation)
    else:
        annotation = SymmetryAnnotation()
    return mesh, annotation


def _load_camera(path) -> CameraIntrinsics:
    doc = json.loads(Path(path).read_text())
    return CameraIntrinsics.from_json_dict(doc)


def _sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@click.group()
def main():
    """Symmetry-aware surface encoding toolkit."""
    setup_logging()


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(), help="project config JSON")
@click.option("--seed", type=int, default=None)
@click.option("--bits", type=int, default=None)
@click.option("--threshold", type=float, default=None,
              help="classification threshold (fraction of diameter)")
@_guard
def classify(config_path, seed, bits, threshold):
    """Classify vertices against the annotated symmetries."""
    cfg = _load_project(config_path, seed=seed, bits=bits, threshold=threshold)
    mesh, annotation = _load_inputs(cfg)
    cls = classify_vertices(mesh, annotation.candidates(mesh),
                            threshold=cfg.classify_threshold,
                            k_test=cfg.k_test)
    report = {
        "counts": cls.counts(),
        "threshold_abs": float(cls.threshold),
        "unclassified_count": int(np.count_nonzero(cls.kinds == "none")),
        "kinds": cls.kinds.tolist(),
        "errors": [float(e) if np.isfinite(e) else None for e in cls.errors],
    }
    json_path = cfg.out_path("classification.json")
    json_path.write_text(json.dumps(report, sort_keys=True))

    csv_path = cfg.out_path("classification.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex", "kind", "error"])
        for i, (kind, err) in enumerate(zip(cls.kinds, cls.errors)):
            writer.writerow([i, kind, f"{err:.12g}" if np.isfinite(err) else ""])

    fig_path = cfg.out_path("classification.png")
    figures.classification_figure(cls, fig_path, threshold=cls.threshold)

    for kind, count in sorted(cls.counts().items()):
        click.echo(f"{kind},{count}")
    if report["unclassified_count"]:
        click.echo(f"warning: {report['unclassified_count']} vertices "
                   "matched no symmetry", err=True)
    click.echo(f"report: {json_path} (sha256 {_sha256_file(json_path)})")
    click.echo(f"figure: {fig_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--bits", type=int, default=None)
@click.option("--one-to-one", is_flag=True,
              help="baseline encoding without symmetry handling")
@_guard
def encode(config_path, seed, bits, one_to_one):
    """Build a surface encoding and write it to the output directory."""
    cfg = _load_project(config_path, seed=seed, bits=bits)
    mesh, annotation = _load_inputs(cfg)
    if one_to_one:
        enc = encode_mesh_one_to_one(mesh, d=cfg.d, seed=cfg.seed)
    else:
        enc = encode_mesh_symcode(
            mesh, annotation, d=cfg.d, seed=cfg.seed,
            threshold=cfg.classify_threshold, k_test=cfg.k_test,
            merge_tolerance=cfg.merge_tolerance * object_diameter(mesh))
    out = cfg.out_path("encoding.symenc")
    save_encoding(enc, out)
    click.echo(f"encoding: {out}")
    click.echo(f"kind,{enc.kind}")
    click.echo(f"groups,{enc.group_count}")
    click.echo(f"content_hash,{content_hash(enc)}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--pose", "pose_path", required=True, type=click.Path(),
              help="pose JSON with R (9 floats) and t (3 floats)")
@click.option("--camera", "camera_path", type=click.Path(), default=None,
              help="camera JSON; defaults to the config camera")
@click.option("--encoding", "encoding_path", type=click.Path(), default=None)
@click.option("--prefix", default="view", help="output file prefix")
@_guard
def render(config_path, pose_path, camera_path, encoding_path, prefix):
    """Render label maps for one pose."""
    cfg = _load_project(config_path)
    mesh, _ = _load_inputs(cfg)
    camera_path = camera_path or cfg.camera
    if not camera_path:
        _fail(EXIT_CONFIG, "no camera file in config or on the command line")
    try:
        K = _load_camera(camera_path)
        pose = Pose.from_json_dict(json.loads(Path(pose_path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        _fail(EXIT_DATA, f"unreadable pose or camera: {exc}")
    encoding_path = encoding_path or cfg.out_path("encoding.symenc")
    enc = load_encoding(encoding_path)
    if enc.vertex_count != mesh.vertex_count:
        raise ConfigMismatch("encoding does not match the mesh vertex count")

    maps = render_labels(mesh, enc, K, pose)
    out = {
        "visible": cfg.out_path(f"{prefix}_visible.pgm"),
        "amodal": cfg.out_path(f"{prefix}_amodal.pgm"),
        "code": cfg.out_path(f"{prefix}_code.pgm" if enc.d <= 15
                             else f"{prefix}_code.raw"),
        "depth": cfg.out_path(f"{prefix}_depth.raw"),
        "figure": cfg.out_path(f"{prefix}_labels.png"),
    }
    write_mask_pgm(maps.visible, out["visible"])
    write_mask_pgm(maps.amodal, out["amodal"])
    write_code_map(maps, out["code"])
    write_depth_raw(maps.depth, out["depth"])
    figures.codemap_figure(maps, out["figure"])

    visible_count = int(np.count_nonzero(maps.visible))
    if visible_count == 0:
        click.echo("warning: object not visible from this pose", err=True)
    click.echo(f"visible_pixels,{visible_count}")
    for name in ("visible", "amodal", "code", "depth", "figure"):
        click.echo(f"{name}: {out[name]}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--camera", "camera_path", type=click.Path(), default=None)
@click.option("--encoding", "encoding_path", type=click.Path(), default=None)
@click.option("--prefix", default="view", help="prefix used by render")
@click.option("--stride", type=int, default=1)
@click.option("--ransac-threshold", type=float, default=2.0)
@click.option("--ransac-iterations", type=int, default=256)
@_guard
def solve(config_path, camera_path, encoding_path, prefix, stride,
          ransac_threshold, ransac_iterations):
    """Recover a pose from rendered label maps."""
    cfg = _load_project(config_path)
    camera_path = camera_path or cfg.camera
    if not camera_path:
        _fail(EXIT_CONFIG, "no camera file in config or on the command line")
    K = _load_camera(camera_path)
    encoding_path = encoding_path or cfg.out_path("encoding.symenc")
    enc = load_encoding(encoding_path)

    code_path = cfg.out_path(f"{prefix}_code.pgm" if enc.d <= 15
                             else f"{prefix}_code.raw")
    maps = LabelMaps(
        visible=read_mask_pgm(cfg.out_path(f"{prefix}_visible.pgm")),
        amodal=read_mask_pgm(cfg.out_path(f"{prefix}_amodal.pgm")),
        code_map=read_code_map(code_path),
        depth=read_depth_raw(cfg.out_path(f"{prefix}_depth.raw")),
        d=enc.d)
    corr = decode_map_to_correspondences(maps, enc, stride=stride)
    try:
        pose, inliers = ransac_pnp(corr, K, threshold=ransac_threshold,
                                   iterations=ransac_iterations, seed=cfg.seed)
    except NoConsensus as exc:
        _fail(EXIT_DATA, str(exc))
    out = cfg.out_path(f"{prefix}_pose.json")
    out.write_text(json.dumps(pose.to_json_dict(), sort_keys=True))
    click.echo(f"correspondences,{len(corr)}")
    click.echo(f"inliers,{len(inliers)}")
    click.echo(f"pose: {out}")


@main.command(name="eval")
@click.option("--estimates", "estimates_path", required=True, type=click.Path())
@click.option("--gt", "gt_path", required=True, type=click.Path(),
              help="ground-truth poses in the same CSV format")
@click.option("--models", "models_path", required=True, type=click.Path(),
              help="JSON mapping obj_id to mesh path")
@click.option("--annotations", "annotations_path", type=click.Path(),
              default=None, help="JSON mapping obj_id to annotation path")
@click.option("--camera", "camera_path", required=True, type=click.Path())
@click.option("--grouping", "grouping_path", type=click.Path(), default=None,
              help="JSON mapping group name to obj_id list; adds per-group scores")
@click.option("--out", "out_dir", default="out", type=click.Path())
@click.option("--vsd-tau", type=float, default=20.0)
@click.option("--vsd-cut", type=float, default=0.3)
@_guard
def eval_cmd(estimates_path, gt_path, models_path, annotations_path,
             camera_path, grouping_path, out_dir, vsd_tau, vsd_cut):
    """Score estimated poses against ground truth (BOP-style)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    K = _load_camera(camera_path)
    estimates = load_results_csv(estimates_path)
    gt_rows = load_results_csv(gt_path)
    if not gt_rows:
        _fail(EXIT_DATA, "ground truth file holds no instances")

    models_doc = json.loads(Path(models_path).read_text())
    base = Path(models_path).parent
    meshes = {}
    for key, rel in models_doc.items():
        p = Path(rel)
        meshes[int(key)] = load_mesh(p if p.is_absolute() else base / p)
    annotations = {}
    if annotations_path:
        ann_doc = json.loads(Path(annotations_path).read_text())
        abase = Path(annotations_path).parent
        for key, rel in ann_doc.items():
            p = Path(rel)
            annotations[int(key)] = load_annotation(
                p if p.is_absolute() else abase / p)

    cfg = MetricConfig(vsd_tau=vsd_tau, vsd_cut=vsd_cut)
    motion_cache = {}
    points_cache = {}
    diam_cache = {}

    def per_object(obj_id):
        if obj_id not in meshes:
            raise ConfigMismatch(f"no model for object {obj_id}")
        if obj_id not in motion_cache:
            ann = annotations.get(obj_id, SymmetryAnnotation())
            motion_cache[obj_id] = ann.motion_set(cfg.continuous_steps)
            points_cache[obj_id] = sample_points(meshes[obj_id].vertices,
                                                 cfg.max_points)
            diam_cache[obj_id] = object_diameter(meshes[obj_id])
        return (meshes[obj_id], motion_cache[obj_id], points_cache[obj_id],
                diam_cache[obj_id])

    n_ratios = len(cfg.vsd_tau_ratios)
    vsd_grid = []
    mssd_errors = []
    mspd_errors = []
    vsd_fixed = []
    diameters = []
    instance_rows = []
    for gt_row in gt_rows:
        mesh, motions, points, diameter = per_object(gt_row.obj_id)
        cands = [e for e in estimates
                 if (e.scene_id, e.im_id, e.obj_id)
                 == (gt_row.scene_id, gt_row.im_id, gt_row.obj_id)]
        diameters.append(diameter)
        if not cands:
            vsd_grid.append([np.inf] * n_ratios)
            mssd_errors.append(np.inf)
            mspd_errors.append(np.inf)
            vsd_fixed.append(np.inf)
            instance_rows.append((gt_row, None, np.inf, np.inf, np.inf))
            continue
        est = max(cands, key=lambda e: e.score)
        e_mssd = mssd(est.pose, gt_row.pose, motions, points)
        e_mspd = mspd(est.pose, gt_row.pose, motions, points, K)
        depth_est = render_depth(mesh, K, est.pose)
        depth_gt = render_depth(mesh, K, gt_row.pose)
        row_vsd = [vsd_error(depth_est, depth_gt,
                             tau=ratio * diameter, delta=cfg.vsd_delta)
                   for ratio in cfg.vsd_tau_ratios]
        e_vsd = vsd_error(depth_est, depth_gt, tau=cfg.vsd_tau,
                          delta=cfg.vsd_delta)
        vsd_grid.append(row_vsd)
        mssd_errors.append(e_mssd)
        mspd_errors.append(e_mspd)
        vsd_fixed.append(e_vsd)
        instance_rows.append((gt_row, est, e_vsd, e_mssd, e_mspd))

    vsd_arr = np.array(vsd_grid)
    mssd_arr = np.asarray(mssd_errors, dtype=float)
    mspd_arr = np.asarray(mspd_errors, dtype=float)
    vsd_fixed_arr = np.asarray(vsd_fixed, dtype=float)
    diam_arr = np.array(diameters)
    ar = ar_scores(vsd_arr, mssd_arr, mspd_arr, diam_arr,
                   image_width=K.width, config=cfg)
    recall = vsd_recall(vsd_fixed_arr, cut=cfg.vsd_cut)

    extra = {"instances": len(gt_rows), "vsd_tau": cfg.vsd_tau,
             "vsd_cut": cfg.vsd_cut}
    groups_out = {}
    if grouping_path:
        gdoc = json.loads(Path(grouping_path).read_text())
        obj_ids = np.array([r.obj_id for r in gt_rows])
        for gname, ids in gdoc.items():
            sel = np.isin(obj_ids, [int(i) for i in ids])
            g_ar = ar_scores(vsd_arr[sel], mssd_arr[sel], mspd_arr[sel],
                             diam_arr[sel], image_width=K.width, config=cfg)
            groups_out[str(gname)] = {
                "AR": g_ar[0], "AR_VSD": g_ar[1], "AR_MSSD": g_ar[2],
                "AR_MSPD": g_ar[3],
                "recall_vsd": vsd_recall(vsd_fixed_arr[sel],
                                         cut=cfg.vsd_cut),
                "instances": int(np.count_nonzero(sel)),
            }
        extra["groups"] = groups_out

    report_path = out / "report.json"
    write_report(report_path, ar, recall, extra=extra)
    csv_path = out / "instances.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "im_id", "obj_id", "matched",
                         "vsd", "mssd", "mspd"])
        for gt_row, est, e_vsd, e_mssd, e_mspd in instance_rows:
            writer.writerow([gt_row.scene_id, gt_row.im_id, gt_row.obj_id,
                             int(est is not None),
                             f"{e_vsd:.6g}", f"{e_mssd:.6g}", f"{e_mspd:.6g}"])
    fig_path = out / "report.png"
    figures.eval_figure(ar, vsd_fixed, cfg.vsd_cut, fig_path)

    click.echo(f"AR,{ar[0]:.6f}")
    click.echo(f"AR_VSD,{ar[1]:.6f}")
    click.echo(f"AR_MSSD,{ar[2]:.6f}")
    click.echo(f"AR_MSPD,{ar[3]:.6f}")
    click.echo(f"recall_vsd,{recall:.6f}")
    for gname in sorted(groups_out):
        click.echo(f"AR[{gname}],{groups_out[gname]['AR']:.6f}")
        click.echo(f"recall_vsd[{gname}],"
                   f"{groups_out[gname]['recall_vsd']:.6f}")
    click.echo(f"report: {report_path} (sha256 {_sha256_file(report_path)})")
    click.echo(f"figure: {fig_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="static frontend directory served under /ui")
@_guard
def serve(config_path, port, host, ui_dir):
    """Run the annotation service."""
    import uvicorn

    from .service import create_app
    cfg = _load_project(config_path)
    app = create_app(cfg, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
