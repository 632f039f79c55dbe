"""Pose recovery from 2D-3D correspondences and symmetry-canonical mapping.

EPnP with a RANSAC wrapper recovers poses from decoded code maps; the
closest-symmetric-pose mapping collapses the set of ground-truth-equivalent
poses onto a canonical representative by Frobenius-nearest rotation. The
6-vector rotation and scale-invariant translation parameterizations used by
pose regression heads are provided with exact inverses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .encoding import SurfaceEncoding
from .errors import (DegenerateConfiguration, DegenerateInput, NoConsensus,
                     NonPositiveDepth, TooFewPoints, UnassignedCode)
from .geometry import CameraIntrinsics, Pose
from .render import LabelMaps
from .symmetry import SymmetryTransformSet

RANSAC_ITERATIONS = 256
RANSAC_THRESHOLD = 2.0       # pixels
RANSAC_CONFIDENCE = 0.999

_RANK_TOL = 1e-12


@dataclass(frozen=True)
class Correspondence2D3D:
    """One pixel-to-model-point match."""

    pixel: np.ndarray
    point: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixel, dtype=float).reshape(2)
        pt = np.asarray(self.point, dtype=float).reshape(3)
        if not (np.all(np.isfinite(px)) and np.all(np.isfinite(pt))):
            raise ValueError("correspondence coordinates must be finite")
        px.flags.writeable = False
        pt.flags.writeable = False
        object.__setattr__(self, "pixel", px)
        object.__setattr__(self, "point", pt)


@dataclass(frozen=True)
class Correspondences:
    """Column form of a correspondence list: points (m, 3), pixels (m, 2)."""

    points: np.ndarray
    pixels: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, float)).reshape(-1, 3)
        pix = np.ascontiguousarray(np.asarray(self.pixels, float)).reshape(-1, 2)
        if pts.shape[0] != pix.shape[0]:
            raise ValueError("points and pixels must pair up")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(pix))):
            raise ValueError("correspondence coordinates must be finite")
        pts.flags.writeable = False
        pix.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "pixels", pix)

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, idx) -> "Correspondences":
        idx = np.asarray(idx)
        return Correspondences(self.points[idx], self.pixels[idx])

    @classmethod
    def from_pairs(cls, pairs) -> "Correspondences":
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros((0, 3)), np.zeros((0, 2)))
        return cls(np.array([p.point for p in pairs]),
                   np.array([p.pixel for p in pairs]))


def _as_correspondences(corr) -> Correspondences:
    if isinstance(corr, Correspondences):
        return corr
    return Correspondences.from_pairs(corr)


@dataclass(frozen=True)
class PoseSet:
    """All ground-truth-equivalent poses of one estimate."""

    poses: tuple

    def __post_init__(self):
        poses = tuple(self.poses)
        if not poses:
            raise ValueError("pose set cannot be empty")
        object.__setattr__(self, "poses", poses)

    def __len__(self):
        return len(self.poses)

    def __iter__(self):
        return iter(self.poses)

    @classmethod
    def from_base(cls, base: Pose, motions: SymmetryTransformSet) -> "PoseSet":
        """Poses T·m for every motion m: the model is moved onto itself
        before the base pose applies."""
        return cls(tuple(base.compose(m) for m in motions))


# ---------------------------------------------------------------------------
# EPnP

def _control_points(points: np.ndarray) -> np.ndarray:
    """Centroid plus principal directions; rows are the 4 control points."""
    c0 = points.mean(axis=0)
    centered = points - c0
    cov = centered.T @ centered / points.shape[0]
    w, v = np.linalg.eigh(cov)
    # ascending eigenvalues; reverse for principal first
    w = w[::-1]
    v = v[:, ::-1]
    if w[0] <= 0 or w[1] / w[0] < _RANK_TOL:
        raise DegenerateConfiguration("3D points are collinear")
    scales = np.sqrt(np.maximum(w, w[0] * _RANK_TOL))
    ctrl = [c0]
    for k in range(3):
        ctrl.append(c0 + scales[k] * v[:, k])
    return np.array(ctrl)


def _barycentric(points: np.ndarray, ctrl: np.ndarray) -> np.ndarray:
    """Alphas with rows summing to 1 such that alphas @ ctrl = points."""
    C = np.vstack([ctrl.T, np.ones(4)])
    try:
        Cinv = np.linalg.inv(C)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfiguration("control points are coplanar") from exc
    hom = np.hstack([points, np.ones((points.shape[0], 1))])
    return hom @ Cinv.T


def _pairwise_sq(ctrl: np.ndarray) -> np.ndarray:
    idx = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    return np.array([np.sum((ctrl[i] - ctrl[j]) ** 2) for i, j in idx]), idx


def _rho_terms(V: np.ndarray):
    """For kernel columns V (12, 4): difference vectors per control pair."""
    vs = V.T.reshape(4, 4, 3)   # (kernel k, control i, xyz)
    idx = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    dv = np.array([[vs[k, i] - vs[k, j] for (i, j) in idx] for k in range(4)])
    return dv  # (4 kernels, 6 pairs, 3)


def _betas_case1(dv, rho):
    num = 0.0
    den = 0.0
    for p in range(6):
        num += np.sqrt(rho[p]) * np.linalg.norm(dv[0, p])
        den += np.sum(dv[0, p] ** 2)
    b = num / den if den > 0 else 0.0
    return np.array([b, 0.0, 0.0, 0.0])


def _betas_case2(dv, rho):
    L = np.zeros((6, 3))
    for p in range(6):
        L[p, 0] = np.sum(dv[0, p] ** 2)
        L[p, 1] = 2 * np.sum(dv[0, p] * dv[1, p])
        L[p, 2] = np.sum(dv[1, p] ** 2)
    sol, *_ = np.linalg.lstsq(L, rho, rcond=None)
    b1 = np.sqrt(abs(sol[0]))
    b2 = np.sqrt(abs(sol[2]))
    if sol[1] < 0:
        b2 = -b2
    return np.array([b1, b2, 0.0, 0.0])


def _betas_case3(dv, rho):
    L = np.zeros((6, 6))
    for p in range(6):
        L[p, 0] = np.sum(dv[0, p] ** 2)
        L[p, 1] = 2 * np.sum(dv[0, p] * dv[1, p])
        L[p, 2] = np.sum(dv[1, p] ** 2)
        L[p, 3] = 2 * np.sum(dv[0, p] * dv[2, p])
        L[p, 4] = 2 * np.sum(dv[1, p] * dv[2, p])
        L[p, 5] = np.sum(dv[2, p] ** 2)
    sol, *_ = np.linalg.lstsq(L, rho, rcond=None)
    b1 = np.sqrt(abs(sol[0]))
    b2 = np.sqrt(abs(sol[2]))
    b3 = np.sqrt(abs(sol[5]))
    if sol[1] < 0:
        b2 = -b2
    if sol[3] < 0:
        b3 = -b3
    return np.array([b1, b2, b3, 0.0])


def _gauss_newton(dv, rho, betas, iterations: int = 10):
    b = betas.copy()
    for _ in range(iterations):
        J = np.zeros((6, 4))
        r = np.zeros(6)
        for p in range(6):
            d = sum(b[k] * dv[k, p] for k in range(4))
            r[p] = np.sum(d ** 2) - rho[p]
            for k in range(4):
                J[p, k] = 2 * np.sum(d * dv[k, p])
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        b = b + step
    return b


def _kabsch(src: np.ndarray, dst: np.ndarray) -> Pose:
    """Rigid transform with T.apply(src) ~= dst in least squares."""
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, _, Vt = np.linalg.svd(H)
    S = np.eye(3)
    if np.linalg.det(Vt.T @ U.T) < 0:
        S[2, 2] = -1.0
    R = Vt.T @ S @ U.T
    return Pose(R, cd - R @ cs)


def _reprojection_residuals(corr: Correspondences, K: CameraIntrinsics,
                            pose: Pose) -> np.ndarray:
    cam = pose.apply(corr.points)
    z = cam[:, 2]
    res = np.full(len(corr), np.inf)
    front = z > 0
    u = K.fx * cam[front, 0] / z[front] + K.cx
    v = K.fy * cam[front, 1] / z[front] + K.cy
    res[front] = np.hypot(u - corr.pixels[front, 0], v - corr.pixels[front, 1])
    return res


def epnp(correspondences, K: CameraIntrinsics) -> Pose:
    """Pose from >= 4 correspondences via the control-point formulation.

    The 12-dim null space of the projection constraints is searched over the
    one-, two- and three-vector kernel combinations; each beta set is
    refined by Gauss-Newton on the control-point distances and the candidate
    with the lowest reprojection error wins.
    """
    corr = _as_correspondences(correspondences)
    m = len(corr)
    if m < 4:
        raise TooFewPoints(f"EPnP needs at least 4 correspondences, got {m}")
    ctrl = _control_points(corr.points)
    alphas = _barycentric(corr.points, ctrl)

    M = np.zeros((2 * m, 12))
    u = corr.pixels[:, 0]
    v = corr.pixels[:, 1]
    for j in range(4):
        M[0::2, 3 * j + 0] = alphas[:, j] * K.fx
        M[0::2, 3 * j + 2] = alphas[:, j] * (K.cx - u)
        M[1::2, 3 * j + 1] = alphas[:, j] * K.fy
        M[1::2, 3 * j + 2] = alphas[:, j] * (K.cy - v)

    MtM = M.T @ M
    w, vecs = np.linalg.eigh(MtM)
    V = vecs[:, :4]  # ascending eigenvalues: 4 smallest
    dv = _rho_terms(V)
    rho, _ = _pairwise_sq(ctrl)

    best = None
    for case in (_betas_case1, _betas_case2, _betas_case3):
        betas = _gauss_newton(dv, rho, case(dv, rho))
        cc = (V @ betas).reshape(4, 3)
        pc = alphas @ cc
        if pc[:, 2].mean() < 0:
            pc = -pc
        if np.abs(pc[:, 2]).max() == 0:
            continue
        pose = _kabsch(corr.points, pc)
        err = float(np.mean(_reprojection_residuals(corr, K, pose)))
        if best is None or err < best[0]:
            best = (err, pose)
    if best is None:
        raise DegenerateConfiguration("no EPnP case produced a usable pose")
    return best[1]


def ransac_pnp(correspondences, K: CameraIntrinsics,
               threshold: float = RANSAC_THRESHOLD,
               iterations: int = RANSAC_ITERATIONS,
               seed: int = 0):
    """EPnP over random minimal sets; returns (pose, inlier indices).

    Deterministic for a fixed seed. Stops early once the running inlier
    ratio makes a better sample unlikely beyond the confidence level.
    """
    corr = _as_correspondences(correspondences)
    m = len(corr)
    if m < 4:
        raise TooFewPoints(f"RANSAC needs at least 4 correspondences, got {m}")
    rng = np.random.default_rng(seed)

    best_count = 0
    best_pose = None
    best_inliers = None
    needed = iterations
    it = 0
    while it < min(needed, iterations):
        sample = rng.choice(m, size=4, replace=False)
        it += 1
        try:
            pose = epnp(corr.subset(sample), K)
        except (DegenerateConfiguration, TooFewPoints):
            continue
        res = _reprojection_residuals(corr, K, pose)
        inliers = res < threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_pose = pose
            best_inliers = inliers
            ratio = count / m
            if ratio > 0:
                denom = np.log(max(1.0 - ratio ** 4, 1e-300))
                needed = min(iterations,
                             int(np.ceil(np.log(1 - RANSAC_CONFIDENCE) / denom))
                             if denom < 0 else iterations)
    if best_count < 4:
        raise NoConsensus(f"best consensus has {best_count} inliers")

    idx = np.flatnonzero(best_inliers)
    try:
        refit = epnp(corr.subset(idx), K)
        res = _reprojection_residuals(corr, K, refit)
        refit_inliers = res < threshold
        if int(refit_inliers.sum()) >= 4:
            return refit, np.flatnonzero(refit_inliers)
    except (DegenerateConfiguration, TooFewPoints):
        pass
    # refit degenerated; keep the winning sample's model and consensus
    return best_pose, idx


def decode_map_to_correspondences(maps: LabelMaps, encoding: SurfaceEncoding,
                                  stride: int = 1) -> Correspondences:
    """Visible pixels on a stride grid paired with decoded main points.

    Pixel coordinates are pixel centers. Codes that were never assigned by
    the encoding are skipped.
    """
    grid = np.zeros_like(maps.visible)
    grid[::int(stride), ::int(stride)] = True
    rows, cols = np.nonzero(maps.visible & grid)
    codes = maps.code_map[rows, cols]

    uniq, inverse = np.unique(codes, return_inverse=True)
    mains = np.zeros((uniq.size, 3))
    known = np.zeros(uniq.size, dtype=bool)
    for i, code in enumerate(uniq):
        try:
            mains[i] = encoding.decode(int(code))[0]
            known[i] = True
        except UnassignedCode:
            pass
    keep = known[inverse]
    if not keep.any():
        return Correspondences(np.zeros((0, 3)), np.zeros((0, 2)))
    pixels = np.column_stack([cols[keep] + 0.5, rows[keep] + 0.5])
    return Correspondences(mains[inverse[keep]], pixels)


# ---------------------------------------------------------------------------
# symmetry-canonical pose mapping

def closest_sym_pose(reference: Pose, candidates, use_translation: bool = False) -> Pose:
    """The candidate minimizing the Frobenius distance to the reference.

    Compares rotations by default; use_translation switches to the full
    3x4 [R|t] comparison for symmetries about offset axes. Ties keep the
    earliest candidate.
    """
    poses = list(candidates.poses if isinstance(candidates, PoseSet) else candidates)
    if not poses:
        raise ValueError("candidate set cannot be empty")
    dists = []
    for cand in poses:
        d = np.linalg.norm(cand.rotation - reference.rotation)
        if use_translation:
            d = np.sqrt(d * d + np.sum((cand.translation - reference.translation) ** 2))
        dists.append(d)
    return poses[int(np.argmin(dists))]


# ---------------------------------------------------------------------------
# parameterizations

def rotation_to_r6d(R: np.ndarray) -> np.ndarray:
    """First two columns of the rotation, flattened to 6 values."""
    R = np.asarray(R, dtype=float).reshape(3, 3)
    return np.concatenate([R[:, 0], R[:, 1]])


def r6d_to_rotation(r6d: np.ndarray) -> np.ndarray:
    """Gram-Schmidt recovery of a rotation from its first two columns."""
    r = np.asarray(r6d, dtype=float).reshape(6)
    a1, a2 = r[:3], r[3:]
    n1 = np.linalg.norm(a1)
    if n1 < 1e-12:
        raise DegenerateInput("first 3-vector of r6d is zero")
    b1 = a1 / n1
    a2p = a2 - (b1 @ a2) * b1
    n2 = np.linalg.norm(a2p)
    if n2 < 1e-12:
        raise DegenerateInput("r6d vectors are parallel")
    b2 = a2p / n2
    b3 = np.cross(b1, b2)
    return np.column_stack([b1, b2, b3])


@dataclass(frozen=True)
class RoI:
    """Pixel-space region of interest, (left, top, width, height)."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("RoI must have positive extent")

    @property
    def center(self):
        return (self.left + self.width / 2.0, self.top + self.height / 2.0)


def site_to_translation(site, roi: RoI, zoom_ratio: float,
                        K: CameraIntrinsics) -> np.ndarray:
    """Scale-invariant translation decoding.

    The object center pixel is the RoI center offset by (dx * roi width,
    dy * roi height); depth is dz * zoom_ratio; the translation is that
    depth along the back-projected ray.
    """
    dx, dy, dz = (float(x) for x in np.asarray(site, float).reshape(3))
    z = dz * float(zoom_ratio)
    if z <= 0:
        raise NonPositiveDepth(f"decoded depth must be positive, got {z:.6g}")
    cx, cy = roi.center
    u = cx + dx * roi.width
    v = cy + dy * roi.height
    x = (u - K.cx) / K.fx * z
    y = (v - K.cy) / K.fy * z
    return np.array([x, y, z])


def translation_to_site(t, roi: RoI, zoom_ratio: float,
                        K: CameraIntrinsics) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(3)
    if t[2] <= 0:
        raise NonPositiveDepth(f"translation depth must be positive, got {t[2]:.6g}")
    u = K.fx * t[0] / t[2] + K.cx
    v = K.fy * t[1] / t[2] + K.cy
    cx, cy = roi.center
    return np.array([(u - cx) / roi.width, (v - cy) / roi.height,
                     t[2] / float(zoom_ratio)])


# ---------------------------------------------------------------------------
# misc

def nearest_point_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """For each point of a, the distance to the closest point of b."""
    tree = cKDTree(np.asarray(b, float).reshape(-1, 3))
    d, _ = tree.query(np.asarray(a, float).reshape(-1, 3))
    return d
