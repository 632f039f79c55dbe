"""Symmetry-aware pose error metrics and benchmark scoring."""

import json

import numpy as np
import pytest

from symcode import (CameraIntrinsics, MetricConfig, Pose, PoseEstimate,
                     add_distance, adds_distance, ar_scores, load_results_csv,
                     mspd, mssd, nfold_transforms, render_depth,
                     sample_points, save_results_csv, vsd_error, vsd_recall,
                     write_report)
from symcode.errors import ConfigMismatch

from conftest import random_pose, star_tube

CAM = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0,
                       width=640, height=480)


def tube_points(n_wedges=4):
    return star_tube(n_wedges=n_wedges).vertices


def test_symmetric_metrics_zero_on_orbit_poses():
    rng = np.random.default_rng(41)
    pts = tube_points()
    ts = nfold_transforms([0, 0, 1], [0, 0, 0], 4)
    for _ in range(10):
        T = random_pose(rng, (300, 500), txy=20.0)
        for m in ts.motions:
            est = T.compose(m)
            assert mssd(est, T, ts, pts) == 0.0
            assert mspd(est, T, ts, pts, CAM) == 0.0
            assert adds_distance(est, T, pts) < 1e-9


def test_metrics_positive_off_orbit():
    rng = np.random.default_rng(42)
    pts = tube_points()
    ts = nfold_transforms([0, 0, 1], [0, 0, 0], 4)
    T = random_pose(rng, (300, 400), txy=10.0)
    nudged = Pose(rotation=T.rotation, translation=T.translation + [5, 0, 0])
    assert mssd(nudged, T, ts, pts) == pytest.approx(5.0, abs=1e-9)
    assert mspd(nudged, T, ts, pts, CAM) > 0.0
    assert adds_distance(nudged, T, pts) > 0.0
    # a quarter turn about a non-symmetry axis is not forgiven
    from symcode import motion_about_axis
    off = T.compose(motion_about_axis([1, 0, 0], [0, 0, 0], np.pi / 2))
    assert mssd(off, T, ts, pts) > 1.0


def test_add_vs_adds_on_symmetric_shape():
    rng = np.random.default_rng(43)
    pts = tube_points()
    ts = nfold_transforms([0, 0, 1], [0, 0, 0], 4)
    T = random_pose(rng, (300, 400))
    est = T.compose(ts.motions[1])
    # plain ADD penalizes the quarter turn, ADD-S forgives it
    assert add_distance(est, T, pts) > 1.0
    assert adds_distance(est, T, pts) < 1e-9


def test_vsd_zero_on_identity_and_recall():
    mesh = star_tube(n_wedges=4)
    rng = np.random.default_rng(44)
    T = random_pose(rng, (90, 110))
    K = CameraIntrinsics(fx=200, fy=200, cx=128, cy=128, width=256, height=256)
    dep = render_depth(mesh, K, T)
    assert vsd_error(dep, dep) == 0.0
    errs = np.array([0.0, 0.1, 0.29, 0.3, 0.9])
    # the cut is strict: e < 0.3 counts
    assert vsd_recall(errs, cut=0.3) == pytest.approx(3 / 5)
    assert vsd_recall(np.zeros(4)) == 1.0


def test_vsd_scene_occlusion_ignored_consistently():
    mesh = star_tube(n_wedges=2)
    K = CameraIntrinsics(fx=200, fy=200, cx=128, cy=128, width=256, height=256)
    rng = np.random.default_rng(45)
    T = random_pose(rng, (90, 110))
    dep = render_depth(mesh, K, T)
    # scene depth within delta of the object keeps pixels visible;
    # zero marks pixels without a scene reading
    near = np.where(dep > 0, dep - 5.0, 0.0)
    assert vsd_error(dep, dep, scene_depth=near) == 0.0
    # a scene surface far in front of the object hides everything and the
    # empty visibility union counts as a full miss
    wall = np.where(dep > 0, dep - 50.0, 0.0)
    assert vsd_error(dep, dep, scene_depth=wall) == 1.0


def test_vsd_tau_monotone():
    mesh = star_tube(n_wedges=2)
    K = CameraIntrinsics(fx=200, fy=200, cx=128, cy=128, width=256, height=256)
    rng = np.random.default_rng(46)
    T = random_pose(rng, (90, 110))
    dep = render_depth(mesh, K, T)
    shifted = Pose(rotation=T.rotation, translation=T.translation + [0, 0, 8])
    dep2 = render_depth(mesh, K, shifted)
    e_tight = vsd_error(dep2, dep, tau=5.0)
    e_loose = vsd_error(dep2, dep, tau=50.0)
    assert 0.0 < e_loose <= e_tight <= 1.0


def test_ar_scores_perfect_and_hopeless():
    n = 6
    diam = np.full(n, 100.0)
    perfect = ar_scores(np.zeros((n, 10)), np.zeros(n), np.zeros(n), diam)
    assert perfect == (1.0, 1.0, 1.0, 1.0)
    hopeless = ar_scores(np.ones((n, 10)), np.full(n, 1e9),
                         np.full(n, 1e9), diam)
    assert hopeless == (0.0, 0.0, 0.0, 0.0)


def test_ar_thresholds_are_strict():
    # an error exactly on a grid line fails that line: 0.05 * 100 = 5.0
    diam = np.array([100.0])
    out = ar_scores(np.ones((1, 10)), np.array([5.0]), np.array([1e9]), diam)
    ar, ar_vsd, ar_mssd, ar_mspd = out
    assert ar_mssd == pytest.approx(0.9)
    assert ar == pytest.approx((ar_vsd + ar_mssd + ar_mspd) / 3)
    just_under = ar_scores(np.ones((1, 10)), np.array([5.0 - 1e-9]),
                           np.array([1e9]), diam)
    assert just_under[2] == pytest.approx(1.0)
    # same rule on the vsd theta grid: e == 0.05 fails the 0.05 bin
    vs = np.full((1, 10), 0.05)
    assert ar_scores(vs, np.array([1e9]), np.array([1e9]), diam)[1] \
        == pytest.approx(np.mean(np.arange(1, 11) * 0.05 > 0.05))


def test_ar_mspd_scales_with_image_width():
    diam = np.array([100.0])
    err = np.array([12.0])
    wide = ar_scores(np.ones((1, 10)), np.array([1e9]), err, diam,
                     image_width=1280)
    narrow = ar_scores(np.ones((1, 10)), np.array([1e9]), err, diam,
                       image_width=640)
    assert wide[3] > narrow[3]


def test_ar_rejects_wrong_grid():
    with pytest.raises(ConfigMismatch):
        ar_scores(np.zeros((3, 4)), np.zeros(3), np.zeros(3),
                  np.full(3, 50.0))


def test_metric_config_grids():
    cfg = MetricConfig()
    assert cfg.vsd_tau == 20.0
    assert cfg.vsd_cut == 0.3
    assert np.allclose(cfg.vsd_tau_ratios, np.arange(1, 11) * 0.05)
    assert np.allclose(cfg.rel_thresholds, np.arange(1, 11) * 0.05)
    assert tuple(cfg.mspd_thresholds) == tuple(range(5, 55, 5))


def test_sample_points_cap_and_determinism():
    rng = np.random.default_rng(47)
    pts = rng.normal(size=(500, 3))
    a = sample_points(pts, max_count=100, seed=3)
    b = sample_points(pts, max_count=100, seed=3)
    assert a.shape == (100, 3)
    assert np.array_equal(a, b)
    c = sample_points(pts, max_count=1000)
    assert np.array_equal(c, pts)


def test_write_report_keys(tmp_path):
    p = tmp_path / "report.json"
    write_report(p, (0.6, 0.5, 0.65, 0.7), 0.8, extra={"objects": 3})
    data = json.loads(p.read_text())
    assert data["AR"] == 0.6
    assert data["AR_VSD"] == 0.5
    assert data["AR_MSSD"] == 0.65
    assert data["AR_MSPD"] == 0.7
    assert data["recall_vsd_0.3"] == 0.8
    assert data["objects"] == 3


def test_results_csv_round_trip(tmp_path):
    rng = np.random.default_rng(48)
    rows = []
    for i in range(5):
        T = random_pose(rng, (200, 900), txy=40.0)
        rows.append(PoseEstimate(scene_id=i, im_id=10 * i, obj_id=i % 3,
                                 score=rng.random(), pose=T,
                                 time=rng.random()))
    path = tmp_path / "results.csv"
    save_results_csv(rows, path)
    back = load_results_csv(path)
    assert len(back) == 5
    for a, b in zip(rows, back):
        assert (a.scene_id, a.im_id, a.obj_id) == (b.scene_id, b.im_id,
                                                   b.obj_id)
        assert b.score == pytest.approx(a.score, abs=0)
        assert np.allclose(b.pose.rotation, a.pose.rotation, atol=1e-12)
        assert np.allclose(b.pose.translation, a.pose.translation, atol=0)
        # stored rotations stay orthonormal after the text round trip
        assert np.allclose(b.pose.rotation @ b.pose.rotation.T, np.eye(3),
                           atol=1e-12)
