"""Symmetry-aware pose error metrics and BOP-style recall aggregation.

VSD compares depth renders over visible pixels; MSSD and MSPD take the
minimum over the object's symmetry motions of the worst surface or
projection displacement; ADD-S is the average closest-point distance. The
average-recall aggregation follows the BOP 2019 grids: VSD over paired
tau/threshold grids, MSSD over diameter-relative thresholds, MSPD over
pixel thresholds scaled by image width / 640.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import BehindCamera, ConfigMismatch, ParseError, ShapeMismatch
from .geometry import CameraIntrinsics, Pose, orthonormalize
from .render import project_points
from .symmetry import SymmetryTransformSet

VSD_TAU = 20.0          # model units (mm for BOP-style data)
VSD_CUT = 0.3
VSD_DELTA = 15.0        # visibility tolerance against scene depth
MAX_SAMPLE_POINTS = 10000

_REL_GRID = tuple(np.round(np.arange(0.05, 0.501, 0.05), 10))
_MSPD_GRID = tuple(range(5, 51, 5))


@dataclass(frozen=True)
class MetricConfig:
    """Thresholds and grids for the pose error metrics."""

    vsd_tau: float = VSD_TAU
    vsd_cut: float = VSD_CUT
    vsd_delta: float = VSD_DELTA
    vsd_tau_ratios: tuple = _REL_GRID
    rel_thresholds: tuple = _REL_GRID
    mspd_thresholds: tuple = _MSPD_GRID
    continuous_steps: int = 64
    max_points: int = MAX_SAMPLE_POINTS

    def __post_init__(self):
        if self.vsd_tau <= 0:
            raise ValueError("vsd_tau must be positive")
        if not 0 < self.vsd_cut <= 1:
            raise ValueError("vsd_cut must be in (0, 1]")
        for grid in (self.vsd_tau_ratios, self.rel_thresholds):
            if any(not 0 < t <= 1 for t in grid):
                raise ValueError("relative thresholds must be in (0, 1]")


# ---------------------------------------------------------------------------
# VSD

def _visible(depth_obj: np.ndarray, scene_depth, delta: float) -> np.ndarray:
    mask = depth_obj > 0
    if scene_depth is None:
        return mask
    # scene pixels without a depth reading cannot occlude
    return mask & ((scene_depth <= 0) | (depth_obj <= scene_depth + delta))


def vsd_error(depth_est: np.ndarray, depth_gt: np.ndarray,
              scene_depth: np.ndarray = None, tau: float = VSD_TAU,
              delta: float = VSD_DELTA) -> float:
    """Visible surface discrepancy between two depth renders.

    e = 1 - matching / union over the visibility masks; a pixel matches when
    it is visible in both renders and the absolute depth difference is
    strictly below tau. An empty union scores 1.
    """
    est = np.asarray(depth_est, dtype=float)
    gt = np.asarray(depth_gt, dtype=float)
    if est.shape != gt.shape or (scene_depth is not None
                                 and np.shape(scene_depth) != gt.shape):
        raise ShapeMismatch("depth maps must share one resolution")
    vis_est = _visible(est, scene_depth, delta)
    vis_gt = _visible(gt, scene_depth, delta)
    union = int(np.count_nonzero(vis_est | vis_gt))
    if union == 0:
        return 1.0
    both = vis_est & vis_gt
    match = int(np.count_nonzero(both & (np.abs(est - gt) < tau)))
    return 1.0 - match / union


def vsd_recall(errors, cut: float = VSD_CUT) -> float:
    """Fraction of errors strictly below the cut; empty input scores 0."""
    errs = np.asarray(list(errors), dtype=float)
    if errs.size == 0:
        return 0.0
    return float(np.count_nonzero(errs < cut) / errs.size)


# ---------------------------------------------------------------------------
# point-set metrics

def sample_points(points: np.ndarray, max_count: int = MAX_SAMPLE_POINTS,
                  seed: int = 0) -> np.ndarray:
    """Farthest-point subsample once the set exceeds max_count.

    Greedy max-min selection started from the lowest-index point; the seed
    is accepted for interface stability but the walk is deterministic.
    """
    del seed
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = pts.shape[0]
    if n <= max_count:
        return pts
    chosen = np.zeros(max_count, dtype=np.int64)
    dist = np.linalg.norm(pts - pts[0], axis=1)
    for k in range(1, max_count):
        chosen[k] = int(np.argmax(dist))
        dist = np.minimum(dist, np.linalg.norm(pts - pts[chosen[k]], axis=1))
    return pts[np.sort(chosen)]


def mssd(T_est: Pose, T_gt: Pose, motions: SymmetryTransformSet,
         points: np.ndarray) -> float:
    """Min over motions of the max surface displacement."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise ValueError("mssd needs at least one point")
    est = T_est.apply(pts)
    best = np.inf
    for m in motions:
        gt = T_gt.compose(m).apply(pts)
        best = min(best, float(np.linalg.norm(est - gt, axis=1).max()))
    return best


def mspd(T_est: Pose, T_gt: Pose, motions: SymmetryTransformSet,
         points: np.ndarray, K: CameraIntrinsics) -> float:
    """Min over motions of the max projected displacement, in pixels."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise ValueError("mspd needs at least one point")
    est_cam = T_est.apply(pts)
    if np.any(est_cam[:, 2] <= 0):
        raise BehindCamera("estimated pose puts points behind the camera")
    est_px = project_points(K, est_cam)
    best = np.inf
    for m in motions:
        gt_cam = T_gt.compose(m).apply(pts)
        if np.any(gt_cam[:, 2] <= 0):
            raise BehindCamera("ground-truth pose puts points behind the camera")
        gt_px = project_points(K, gt_cam)
        best = min(best, float(np.linalg.norm(est_px - gt_px, axis=1).max()))
    return best


def add_distance(T_est: Pose, T_gt: Pose, points: np.ndarray) -> float:
    """Average same-point displacement (the symmetry-blind ADD)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return float(np.linalg.norm(T_est.apply(pts) - T_gt.apply(pts), axis=1).mean())


def adds_distance(T_est: Pose, T_gt: Pose, points: np.ndarray) -> float:
    """Average closest-point distance between the transformed point sets."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise ValueError("adds needs at least one point")
    est = T_est.apply(pts)
    gt = T_gt.apply(pts)
    d, _ = cKDTree(gt).query(est)
    return float(d.mean())


# ---------------------------------------------------------------------------
# BOP-style aggregation

def ar_scores(vsd_errors: np.ndarray, mssd_errors, mspd_errors, diameters,
              image_width: int = 640, config: MetricConfig = None):
    """(AR, AR_VSD, AR_MSSD, AR_MSPD) over the BOP 2019 grids.

    vsd_errors is (n, len(vsd_tau_ratios)): per instance, the VSD error at
    each tau = ratio * diameter. mssd/mspd are per-instance lengths/pixels.
    Missing estimates are encoded as np.inf and count as misses everywhere.
    """
    cfg = config or MetricConfig()
    mssd_errors = np.asarray(mssd_errors, dtype=float)
    mspd_errors = np.asarray(mspd_errors, dtype=float)
    diameters = np.asarray(diameters, dtype=float)
    n = mssd_errors.shape[0]
    if diameters.shape != (n,):
        raise ConfigMismatch("need one diameter per instance")
    vsd_errors = np.asarray(vsd_errors, dtype=float)
    if vsd_errors.shape != (n, len(cfg.vsd_tau_ratios)):
        raise ConfigMismatch(
            f"vsd_errors must be (n, {len(cfg.vsd_tau_ratios)}) to cover the tau grid")
    if n == 0:
        return 0.0, 0.0, 0.0, 0.0

    theta = np.asarray(cfg.rel_thresholds)
    # VSD: recall per (tau ratio, theta) cell, then mean over the grid
    ar_vsd = float(np.mean(vsd_errors[:, :, None] < theta[None, None, :]))
    ar_mssd = float(np.mean(
        mssd_errors[:, None] < theta[None, :] * diameters[:, None]))
    r = image_width / 640.0
    mspd_grid = np.asarray(cfg.mspd_thresholds, dtype=float) * r
    ar_mspd = float(np.mean(mspd_errors[:, None] < mspd_grid[None, :]))
    ar = (ar_vsd + ar_mssd + ar_mspd) / 3.0
    return ar, ar_vsd, ar_mssd, ar_mspd


def write_report(path, ar_tuple, recall_vsd: float, extra: dict = None) -> None:
    """JSON evaluation report with the AR breakdown and the single-tau recall."""
    ar, ar_vsd, ar_mssd, ar_mspd = ar_tuple
    doc = {
        "AR": ar,
        "AR_VSD": ar_vsd,
        "AR_MSSD": ar_mssd,
        "AR_MSPD": ar_mspd,
        "recall_vsd_0.3": recall_vsd,
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# BOP results CSV

@dataclass(frozen=True)
class PoseEstimate:
    """One row of a results file."""

    scene_id: int
    im_id: int
    obj_id: int
    score: float
    pose: Pose
    time: float = -1.0


def load_results_csv(path) -> list:
    """Rows of scene_id,im_id,obj_id,score,R,t,time with R row-major."""
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return rows
            if header[:4] != ["scene_id", "im_id", "obj_id", "score"]:
                # tolerate headerless files
                fh.seek(0)
                reader = csv.reader(fh)
            rowno = 0
            for rec in reader:
                rowno += 1
                if not rec or not "".join(rec).strip():
                    continue
                try:
                    scene_id, im_id, obj_id, score, R, t = rec[:6]
                    time = float(rec[6]) if len(rec) > 6 else -1.0
                    Rm = np.array([float(x) for x in R.split()]).reshape(3, 3)
                    tv = np.array([float(x) for x in t.split()]).reshape(3)
                    # tolerate rotations rounded by limited print precision
                    if np.abs(Rm @ Rm.T - np.eye(3)).max() > 1e-5:
                        raise ValueError("rotation is not orthonormal")
                    rows.append(PoseEstimate(
                        scene_id=int(scene_id), im_id=int(im_id),
                        obj_id=int(obj_id), score=float(score),
                        pose=Pose(orthonormalize(Rm), tv), time=time))
                except (ValueError, IndexError) as exc:
                    raise ParseError(
                        f"{path}: bad results csv row {rowno}: {exc}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: cannot read results csv: {exc}") from exc
    return rows


def save_results_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "im_id", "obj_id", "score", "R", "t", "time"])
        for row in rows:
            writer.writerow([
                row.scene_id, row.im_id, row.obj_id, row.score,
                " ".join(f"{x:.17g}" for x in row.pose.rotation.reshape(-1)),
                " ".join(f"{x:.17g}" for x in row.pose.translation),
                row.time,
            ])
