"""Rasterizer correctness against independent oracles, plus map files."""

import json

import numpy as np
import pytest

from symcode import (CameraIntrinsics, LabelMaps, Mesh, Pose,
                     encode_mesh_one_to_one, read_code_map, read_depth_raw,
                     read_mask_pgm, render_depth, render_geometry,
                     render_labels, write_code_map, write_depth_raw,
                     write_mask_pgm)
from symcode.errors import ParseError, ShapeMismatch
from symcode.render import ATTRIBUTION

from conftest import star_tube


def tiny_cam(n=24, f=40.0):
    return CameraIntrinsics(fx=f, fy=f, cx=n / 2, cy=n / 2, width=n, height=n)


def facing_pose(z=20.0):
    return Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, z]))


def oracle_coverage(K, scr, eps_rule=True):
    """Half-plane rasterization of one screen triangle, top-left rule."""
    (x0, y0), (x1, y1), (x2, y2) = scr
    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if area < 0:
        (x1, y1), (x2, y2) = (x2, y2), (x1, y1)
        area = -area
    cover = np.zeros((K.height, K.width), dtype=bool)
    if area == 0:
        return cover
    for v in range(K.height):
        for u in range(K.width):
            px, py = u + 0.5, v + 0.5
            ok = True
            for (ax, ay, bx, by) in (((x1), (y1), (x2), (y2)),
                                     ((x2), (y2), (x0), (y0)),
                                     ((x0), (y0), (x1), (y1))):
                w = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                top_left = (by == ay and bx > ax) or by < ay
                if top_left:
                    ok &= w >= 0
                else:
                    ok &= w > 0
            cover[v, u] = ok
    return cover


def test_single_triangle_matches_coverage_oracle():
    K = tiny_cam()
    rng = np.random.default_rng(11)
    for _ in range(10):
        verts = rng.uniform(-4, 4, size=(3, 3))
        verts[:, 2] = 0.0
        mesh = Mesh(vertices=verts, triangles=[[0, 1, 2]])
        T = facing_pose()
        geom, _ = render_geometry(mesh, K, T)
        cam = T.apply(verts)
        scr = np.column_stack([K.fx * cam[:, 0] / cam[:, 2] + K.cx,
                               K.fy * cam[:, 1] / cam[:, 2] + K.cy])
        assert np.array_equal(geom.mask, oracle_coverage(K, scr))


def moller_trumbore_depth(K, cam_verts, tris):
    """Ray-cast depth for every pixel, nearest hit, inf when missed."""
    H, W = K.height, K.width
    depth = np.full((H, W), np.inf)
    for v in range(H):
        for u in range(W):
            d = np.array([(u + 0.5 - K.cx) / K.fx,
                          (v + 0.5 - K.cy) / K.fy, 1.0])
            for tri in tris:
                a, b, c = cam_verts[tri]
                e1, e2 = b - a, c - a
                pvec = np.cross(d, e2)
                det = e1 @ pvec
                if abs(det) < 1e-12:
                    continue
                tvec = -a  # ray origin is the camera center
                u_ = (tvec @ pvec) / det
                qvec = np.cross(tvec, e1)
                v_ = (d @ qvec) / det
                if u_ < -1e-9 or v_ < -1e-9 or u_ + v_ > 1 + 1e-9:
                    continue
                t = (e2 @ qvec) / det
                if t > 0:
                    z = t * d[2]
                    depth[v, u] = min(depth[v, u], z)
    return depth


def test_depth_matches_ray_cast_oracle():
    K = tiny_cam()
    rng = np.random.default_rng(12)
    verts = rng.uniform(-4, 4, size=(6, 3))
    verts[:, 2] = rng.uniform(-2, 2, size=6)
    mesh = Mesh(vertices=verts, triangles=[[0, 1, 2], [3, 4, 5]])
    T = facing_pose(z=18.0)
    dep = render_depth(mesh, K, T)
    oracle = moller_trumbore_depth(K, T.apply(verts), mesh.triangles)
    got = np.where(dep > 0, dep, np.inf)
    both = np.isfinite(oracle) & np.isfinite(got)
    # coverage may differ by the edge rule on boundary pixels only
    assert (np.isfinite(oracle) ^ np.isfinite(got)).mean() < 0.02
    assert np.allclose(got[both], oracle[both], rtol=1e-9, atol=1e-9)


def test_shared_edge_owned_exactly_once():
    K = tiny_cam()
    quad = np.array([[-3.0, -3.0, 0.0], [3.0, -3.0, 0.0],
                     [3.0, 3.0, 0.0], [-3.0, 3.0, 0.0]])
    T = facing_pose()
    a = Mesh(vertices=quad, triangles=[[0, 1, 2]])
    b = Mesh(vertices=quad, triangles=[[0, 2, 3]])
    whole = Mesh(vertices=quad, triangles=[[0, 1, 2], [0, 2, 3]])
    ga, _ = render_geometry(a, K, T)
    gb, _ = render_geometry(b, K, T)
    gw, _ = render_geometry(whole, K, T)
    assert not np.any(ga.mask & gb.mask)
    assert np.array_equal(ga.mask | gb.mask, gw.mask)


def test_attribution_matches_barycentric_oracle():
    K = tiny_cam()
    rng = np.random.default_rng(13)
    for _ in range(8):
        verts = rng.uniform(-4, 4, size=(3, 3))
        verts[:, 2] = rng.uniform(-1, 1, size=3)
        mesh = Mesh(vertices=verts, triangles=[[0, 1, 2]])
        T = facing_pose(z=15.0)
        geom, _ = render_geometry(mesh, K, T)
        cam = T.apply(verts)
        scr = np.column_stack([K.fx * cam[:, 0] / cam[:, 2] + K.cx,
                               K.fy * cam[:, 1] / cam[:, 2] + K.cy])
        ys, xs = np.nonzero(geom.mask)
        for v, u in zip(ys, xs):
            p = np.array([u + 0.5, v + 0.5])
            lam = np.empty(3)
            for i in range(3):
                a_, b_ = scr[(i + 1) % 3], scr[(i + 2) % 3]
                lam[i] = (b_[0] - a_[0]) * (p[1] - a_[1]) \
                    - (b_[1] - a_[1]) * (p[0] - a_[0])
            area = lam.sum()
            assert geom.vertex_ids[v, u] == np.argmax(lam / area)


def test_near_plane_crossing_does_not_crash():
    K = tiny_cam()
    verts = np.array([[0.0, -2.0, 10.0], [2.0, 2.0, 10.0],
                      [-2.0, 2.0, -5.0]])  # one corner behind the camera
    mesh = Mesh(vertices=verts, triangles=[[0, 1, 2]])
    geom, _ = render_geometry(mesh, K, Pose.identity())
    assert geom.mask.any()
    ids = np.unique(geom.vertex_ids[geom.mask])
    assert set(ids) <= {0, 1, 2}


def test_labels_visibility_and_occlusion(tube4, tube4_annotation, cam256):
    from symcode import encode_mesh_symcode
    enc = encode_mesh_symcode(tube4, tube4_annotation, d=8)
    T = facing_pose(z=95.0)
    clear = render_labels(tube4, enc, cam256, T)
    assert np.array_equal(clear.visible, clear.amodal)
    # slide a wall in front of the left half of the object
    wall = Mesh(vertices=[[-60.0, -60.0, 0.0], [0.0, -60.0, 0.0],
                          [0.0, 60.0, 0.0], [-60.0, 60.0, 0.0]],
                triangles=[[0, 1, 2], [0, 2, 3]])
    occluded = render_labels(tube4, enc, cam256, T,
                             occluders=[(wall, facing_pose(z=50.0))])
    assert np.array_equal(occluded.amodal, clear.amodal)
    assert occluded.visible.sum() < clear.visible.sum()
    assert np.all(occluded.visible <= occluded.amodal)
    # codes exist exactly on visible pixels and come from the encoding
    vis_codes = occluded.code_map[occluded.visible]
    assert np.isin(vis_codes, enc.vertex_codes.astype(np.int64)).all()
    assert np.all(occluded.code_map[~occluded.visible] == -1)


def test_label_maps_invariants_enforced():
    vis = np.zeros((4, 4), bool)
    amo = np.zeros((4, 4), bool)
    vis[1, 1] = True
    codes = np.full((4, 4), -1, dtype=np.int64)
    depth = np.zeros((4, 4))
    with pytest.raises(ValueError):
        LabelMaps(visible=vis, amodal=amo, code_map=codes, depth=depth, d=4)
    amo[1, 1] = True
    with pytest.raises(ValueError):
        LabelMaps(visible=vis, amodal=amo, code_map=codes, depth=depth, d=4)
    codes[1, 1] = 3
    with pytest.raises(ValueError):
        LabelMaps(visible=vis, amodal=amo, code_map=codes, depth=depth, d=4)
    depth[1, 1] = 7.0
    LabelMaps(visible=vis, amodal=amo, code_map=codes, depth=depth, d=4)


def test_object_behind_camera_renders_empty():
    mesh = star_tube(n_wedges=2, n_arc=6, n_z=4)
    K = tiny_cam()
    T = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, -200.0]))
    geom, _ = render_geometry(mesh, K, T)
    assert not geom.mask.any()
    enc = encode_mesh_one_to_one(mesh, d=8)
    maps = render_labels(mesh, enc, K, T)
    assert not maps.visible.any()
    assert np.all(maps.code_map == -1)


def test_mask_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(14)
    mask = rng.random((17, 23)) > 0.5
    p = tmp_path / "m.pgm"
    write_mask_pgm(mask, p)
    assert np.array_equal(read_mask_pgm(p), mask)
    p.write_bytes(p.read_bytes()[:20])
    with pytest.raises(ParseError):
        read_mask_pgm(p)


def test_code_map_pgm_round_trip_and_provenance(tmp_path):
    rng = np.random.default_rng(15)
    codes = rng.integers(0, 2 ** 12, size=(9, 13)).astype(np.int64)
    codes[0, :5] = -1
    p = tmp_path / "c.pgm"
    write_code_map(codes, p, d=12)
    assert np.array_equal(read_code_map(p), codes)
    head = p.read_bytes()[:80].decode("latin1")
    assert ATTRIBUTION in head


def test_code_map_raw_round_trip(tmp_path):
    rng = np.random.default_rng(16)
    codes = rng.integers(0, 2 ** 16, size=(7, 7)).astype(np.int64)
    codes[3, 3] = -1
    p = tmp_path / "c.raw"
    write_code_map(codes, p, d=16)
    assert np.array_equal(read_code_map(p), codes)
    meta = json.loads((tmp_path / "c.raw.json").read_text())
    assert meta["d"] == 16
    assert meta["attribution"] == ATTRIBUTION
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(ParseError):
        read_code_map(p)


def test_depth_raw_round_trip(tmp_path):
    rng = np.random.default_rng(17)
    depth = (rng.random((11, 6)) * 100).astype(np.float32).astype(np.float64)
    p = tmp_path / "d.raw"
    write_depth_raw(depth, p)
    assert np.array_equal(read_depth_raw(p), depth)
    p.write_bytes(p.read_bytes()[:-2])
    with pytest.raises(ShapeMismatch):
        read_depth_raw(p)
    p.write_bytes(b"garbage without newline")
    with pytest.raises(ParseError):
        read_depth_raw(p)
