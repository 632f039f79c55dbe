"""Rigid-body pose, camera intrinsics and small rotation helpers.

Conventions: rotations are 3x3 row-major matrices acting on column points,
translations are in model units (millimetres by dataset convention), and a
pose maps model points into the camera frame as ``R @ p + t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SO3_TOL = 1e-9


def is_rotation(R: np.ndarray, tol: float = SO3_TOL) -> bool:
    """True if R is in SO(3) within tol (orthonormal, det +1)."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    if not np.all(np.isfinite(R)):
        return False
    if np.abs(R.T @ R - np.eye(3)).max() > tol:
        return False
    return abs(np.linalg.det(R) - 1.0) <= tol


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto SO(3) via SVD."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt))
    return U @ D @ Vt


def axis_angle_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    a = np.asarray(axis, dtype=float)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise ValueError("rotation axis must be non-zero")
    a = a / n
    K = np.array([
        [0.0, -a[2], a[1]],
        [a[2], 0.0, -a[0]],
        [-a[1], a[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rotation_aligning(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Minimal rotation taking unit vector src onto unit vector dst."""
    a = np.asarray(src, dtype=float)
    b = np.asarray(dst, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    c = float(np.dot(a, b))
    if c > 1.0 - 1e-12:
        return np.eye(3)
    if c < -1.0 + 1e-12:
        # 180 degrees: rotate about any axis perpendicular to a.
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-8:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        return axis_angle_rotation(perp, np.pi)
    axis = np.cross(a, b)
    angle = np.arctan2(np.linalg.norm(axis), c)
    return axis_angle_rotation(axis, angle)


def geodesic_angle(R1: np.ndarray, R2: np.ndarray) -> float:
    """Geodesic distance between two rotations, in radians."""
    cos = (np.trace(np.asarray(R1).T @ np.asarray(R2)) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


@dataclass(frozen=True)
class Pose:
    """Rigid transform with rotation constrained to SO(3) within 1e-9."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        if not is_rotation(R):
            raise ValueError("rotation is not in SO(3) within 1e-9")
        R = R.copy()
        t = t.copy()
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (n, 3) or (3,) points into this pose's frame."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def compose(self, other: "Pose") -> "Pose":
        """self . other: apply `other` first, then self."""
        return type(self)(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return type(self)(Rt, -Rt @ self.translation)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def to_json_dict(self) -> dict:
        return {
            "R": [float(v) for v in self.rotation.reshape(-1)],
            "t": [float(v) for v in self.translation],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Pose":
        # BOP scene_gt field names accepted as aliases.
        R = doc.get("R", doc.get("cam_R_m2c"))
        t = doc.get("t", doc.get("cam_t_m2c"))
        if R is None or t is None:
            raise ValueError("pose document needs 'R'/'t' (or cam_R_m2c/cam_t_m2c)")
        return cls(np.asarray(R, dtype=float).reshape(3, 3), np.asarray(t, dtype=float))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera parameters plus image resolution (pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def to_json_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CameraIntrinsics":
        if "cam_K" in doc:  # BOP scene_camera row
            K = np.asarray(doc["cam_K"], dtype=float).reshape(3, 3)
            return cls(K[0, 0], K[1, 1], K[0, 2], K[1, 2],
                       int(doc["width"]), int(doc["height"]))
        return cls(float(doc["fx"]), float(doc["fy"]), float(doc["cx"]),
                   float(doc["cy"]), int(doc["width"]), int(doc["height"]))
