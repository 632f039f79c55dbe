"""Rigid transforms, rotation utilities, projection."""

import numpy as np
import pytest

from symcode import (CameraIntrinsics, Pose, axis_angle_rotation,
                     geodesic_angle, is_rotation, orthonormalize, project,
                     project_points, rotation_aligning)


def random_rotation(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def rodrigues(axis, angle):
    a = np.asarray(axis, float)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def test_axis_angle_matches_rodrigues_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        axis = rng.normal(size=3)
        angle = rng.uniform(-2 * np.pi, 2 * np.pi)
        R = axis_angle_rotation(axis, angle)
        assert np.allclose(R, rodrigues(axis, angle), atol=1e-12)
        assert is_rotation(R)


def test_is_rotation_rejects_reflections_and_junk():
    rng = np.random.default_rng(1)
    Q = random_rotation(rng)
    assert is_rotation(Q)
    refl = Q.copy()
    refl[:, 0] = -refl[:, 0]
    assert not is_rotation(refl)
    assert not is_rotation(Q + 1e-6)
    assert not is_rotation(np.zeros((3, 3)))


def test_rotation_aligning_maps_first_onto_second():
    rng = np.random.default_rng(2)
    for _ in range(30):
        a = rng.normal(size=3)
        b = rng.normal(size=3)
        R = rotation_aligning(a, b)
        assert is_rotation(R)
        got = R @ (a / np.linalg.norm(a))
        assert np.allclose(got, b / np.linalg.norm(b), atol=1e-12)


def test_rotation_aligning_antiparallel():
    R = rotation_aligning([0.0, 0.0, 1.0], [0.0, 0.0, -1.0])
    assert is_rotation(R)
    assert np.allclose(R @ [0, 0, 1], [0, 0, -1], atol=1e-12)


def test_orthonormalize_snaps_noisy_rotation():
    rng = np.random.default_rng(3)
    Q = random_rotation(rng)
    noisy = Q + rng.normal(scale=1e-6, size=(3, 3))
    R = orthonormalize(noisy)
    assert is_rotation(R)
    assert np.linalg.norm(R - Q) < 1e-5
    assert np.allclose(orthonormalize(Q), Q, atol=1e-12)


def test_geodesic_angle_recovers_rotation_angle():
    rng = np.random.default_rng(4)
    base = random_rotation(rng)
    for angle in (0.0, 0.3, 1.2, np.pi - 1e-6):
        axis = rng.normal(size=3)
        R = base @ axis_angle_rotation(axis, angle)
        assert geodesic_angle(base, R) == pytest.approx(angle, abs=1e-7)


def test_pose_compose_inverse_apply():
    rng = np.random.default_rng(5)
    A = Pose(random_rotation(rng), rng.normal(size=3))
    B = Pose(random_rotation(rng), rng.normal(size=3))
    pts = rng.normal(size=(20, 3))
    assert np.allclose(A.compose(B).apply(pts), A.apply(B.apply(pts)),
                       atol=1e-12)
    back = A.inverse().apply(A.apply(pts))
    assert np.allclose(back, pts, atol=1e-12)
    I = A.compose(A.inverse())
    assert geodesic_angle(I.rotation, np.eye(3)) < 1e-9
    assert np.linalg.norm(I.translation) < 1e-9


def test_pose_rejects_non_rotation():
    with pytest.raises(ValueError):
        Pose(np.eye(3) * 2.0, np.zeros(3))
    with pytest.raises(ValueError):
        Pose(np.eye(3), [np.nan, 0.0, 0.0])


def test_pose_matrix_and_json_round_trip():
    rng = np.random.default_rng(6)
    T = Pose(random_rotation(rng), rng.normal(size=3))
    M = T.matrix()
    assert M.shape == (4, 4)
    assert np.allclose(M[:3, :3], T.rotation)
    assert np.allclose(M[:3, 3], T.translation)
    assert np.allclose(M[3], [0, 0, 0, 1])
    d = T.to_json_dict()
    back = Pose(np.reshape(d["R"], (3, 3)), d["t"])
    assert np.allclose(back.rotation, T.rotation, atol=1e-15)
    assert np.allclose(back.translation, T.translation, atol=1e-15)


def test_pose_identity():
    I = Pose.identity()
    pts = np.arange(12.0).reshape(4, 3)
    assert np.array_equal(I.apply(pts), pts)


def test_project_points_pinhole_oracle():
    K = CameraIntrinsics(fx=100.0, fy=120.0, cx=64.0, cy=48.0,
                         width=128, height=96)
    pts = np.array([[0.0, 0.0, 10.0], [1.0, -2.0, 5.0], [-3.0, 4.0, 20.0]])
    uv = project_points(K, pts)
    expected = np.stack([100.0 * pts[:, 0] / pts[:, 2] + 64.0,
                         120.0 * pts[:, 1] / pts[:, 2] + 48.0], axis=1)
    assert np.allclose(uv, expected, atol=1e-12)


def test_project_single_point_through_pose():
    K = CameraIntrinsics(fx=100.0, fy=100.0, cx=0.0, cy=0.0,
                         width=64, height=64)
    T = Pose(np.eye(3), [0.0, 0.0, 10.0])
    uv = project(K, T, [1.0, 2.0, 0.0])
    assert np.allclose(uv, [10.0, 20.0], atol=1e-12)


def test_camera_json_dict_accepts_bop_alias():
    d = {"cam_K": [100.0, 0.0, 32.0, 0.0, 110.0, 24.0, 0.0, 0.0, 1.0],
         "width": 64, "height": 48}
    K = CameraIntrinsics.from_json_dict(d)
    assert (K.fx, K.fy, K.cx, K.cy) == (100.0, 110.0, 32.0, 24.0)
    assert (K.width, K.height) == (64, 48)
    K2 = CameraIntrinsics.from_json_dict(
        {"fx": 1.0, "fy": 2.0, "cx": 3.0, "cy": 4.0, "width": 8, "height": 9})
    assert (K2.fx, K2.fy, K2.cx, K2.cy) == (1.0, 2.0, 3.0, 4.0)
