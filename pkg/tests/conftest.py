"""Shared fixtures: exact-symmetry meshes, an asymmetric blob, a labeled
composite, cameras, and session-scoped render caches.

The symmetric fixtures replicate one wedge by exact sign/swap matrices so
orbit matching is bit-exact; the asymmetric blob is a smooth radial field on
an icosphere, stretched so the pose round trip has diameter leverage.
"""

import numpy as np
import pytest

from symcode import (CameraIntrinsics, Mesh, Pose, SymmetryAnnotation,
                     is_identity_motion, render_geometry)

ROT90_Z = [0.0, -1.0, 0.0, 0.0,
           1.0, 0.0, 0.0, 0.0,
           0.0, 0.0, 1.0, 0.0,
           0.0, 0.0, 0.0, 1.0]
ROT180_Z = [-1.0, 0.0, 0.0, 0.0,
            0.0, -1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0]
ROT270_Z = [0.0, 1.0, 0.0, 0.0,
            -1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0]


def star_tube(n_wedges=4, n_arc=12, n_z=16, seed=11):
    """Exactly n-fold tube: one random wedge replicated by exact rotations.

    90 deg about z is (x, y) -> (-y, x) and 180 deg is (x, y) -> (-x, -y),
    both exact in floats, so replicated wedges match the originals bit for
    bit under the annotated motions.
    """
    rng = np.random.default_rng(seed)
    radius = rng.uniform(22.0, 30.0, size=(n_z, n_arc))
    theta = np.arange(n_arc) * (2 * np.pi / n_wedges) / n_arc
    z = np.linspace(-28.0, 28.0, n_z)
    wedge = np.empty((n_z, n_arc, 3))
    wedge[..., 0] = radius * np.cos(theta)[None, :]
    wedge[..., 1] = radius * np.sin(theta)[None, :]
    wedge[..., 2] = z[:, None]
    wedge = wedge.reshape(-1, 3)
    n_local = wedge.shape[0]

    if n_wedges == 4:
        M = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    elif n_wedges == 2:
        M = np.diag([-1.0, -1.0, 1.0])
    else:
        raise ValueError("only 2- and 4-fold tubes are built")
    blocks = [wedge]
    for _ in range(n_wedges - 1):
        blocks.append(blocks[-1] @ M.T)
    verts = np.concatenate(blocks)

    def vid(w, i, j):
        w2, j2 = w, j
        if j == n_arc:  # seam: column 0 of the next wedge
            w2, j2 = (w + 1) % n_wedges, 0
        return w2 * n_local + i * n_arc + j2

    tris = []
    for w in range(n_wedges):
        for i in range(n_z - 1):
            for j in range(n_arc):
                a = vid(w, i, j)
                b = vid(w, i, j + 1)
                c = vid(w, i + 1, j)
                d = vid(w, i + 1, j + 1)
                tris.append([a, b, c])
                tris.append([b, d, c])
    return Mesh(vertices=verts, triangles=np.array(tris))


def _subdivide_unit(v, f):
    nf = len(f)
    e = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]),
                axis=1)
    edges, inv = np.unique(e, axis=0, return_inverse=True)
    mids = v[edges[:, 0]] + v[edges[:, 1]]
    mids /= np.linalg.norm(mids, axis=1, keepdims=True)
    mid_id = len(v) + np.arange(len(edges))
    ab = mid_id[inv[:nf]]
    bc = mid_id[inv[nf:2 * nf]]
    ca = mid_id[inv[2 * nf:]]
    f_new = np.concatenate([
        np.stack([f[:, 0], ab, ca], axis=1),
        np.stack([f[:, 1], bc, ab], axis=1),
        np.stack([f[:, 2], ca, bc], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])
    return np.concatenate([v, mids]), f_new


def icosphere(subdiv):
    phi = (1 + 5 ** 0.5) / 2
    v = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1]], float)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    for _ in range(subdiv):
        v, f = _subdivide_unit(v, f)
    return v, f


def blob_mesh(subdiv=5, base_r=25.0, stretch=(1.0, 0.8, 2.0)):
    """Asymmetric closed surface: smooth radial field on an icosphere.

    The sine field kills every rotational symmetry; the stretch lengthens
    the diameter while leaving local curvature (the correspondence
    quantization floor) unchanged in absolute terms.
    """
    v, f = icosphere(subdiv)
    g = (np.sin(3.1 * v[:, 0] + 0.9) + np.sin(2.3 * v[:, 1] - 1.7)
         + np.sin(4.7 * v[:, 2] + 0.5) + np.sin(2.9 * v[:, 0] * v[:, 1]))
    r = base_r * (1.0 + 0.06 * g)
    return Mesh(vertices=v * r[:, None] * np.asarray(stretch), triangles=f)


def composite_mesh():
    """Cube + cylinder + one spike, with per-vertex part labels.

    Part 0: grid cube, exactly 4-fold about z. Part 1: cylinder of 72-slot
    rings, exactly continuous about z under sampled test angles, with one
    rim vertex pushed radially outward to break its own symmetry.
    Returns (mesh, expected_kinds, spike_index).
    """
    verts, tris, index = [], [], {}

    def vid(p):
        key = p.tobytes()
        if key not in index:
            index[key] = len(verts)
            verts.append(p)
        return index[key]

    g = np.linspace(-16.0, 16.0, 5)
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        for s in (-16.0, 16.0):
            ids = np.empty((5, 5), dtype=int)
            for i in range(5):
                for j in range(5):
                    p = np.empty(3)
                    p[a] = s
                    p[b] = g[i]
                    p[c] = g[j]
                    p[2] += 26.0
                    ids[i, j] = vid(p)
            for i in range(4):
                for j in range(4):
                    tris.append([ids[i, j], ids[i + 1, j], ids[i, j + 1]])
                    tris.append([ids[i + 1, j], ids[i + 1, j + 1],
                                 ids[i, j + 1]])
    n_cube = len(verts)

    n_slots, n_rings, radius = 72, 5, 12.0
    zs = np.linspace(-42.0, -10.0, n_rings)
    ang = 2.0 * np.pi * np.arange(n_slots) / n_slots
    ring_ids = np.empty((n_rings, n_slots), dtype=int)
    for i, zc in enumerate(zs):
        for j in range(n_slots):
            p = np.array([radius * np.cos(ang[j]),
                          radius * np.sin(ang[j]), zc])
            ring_ids[i, j] = vid(p)
    spike_index = ring_ids[2, 7]
    spiked = np.array(verts[spike_index])
    spiked[:2] *= 1.5
    verts[spike_index] = spiked
    for i in range(n_rings - 1):
        for j in range(n_slots):
            a = ring_ids[i, j]
            b = ring_ids[i, (j + 1) % n_slots]
            c = ring_ids[i + 1, j]
            d = ring_ids[i + 1, (j + 1) % n_slots]
            tris.append([a, b, c])
            tris.append([b, d, c])
    for i, zc in ((0, zs[0]), (n_rings - 1, zs[-1])):
        center = vid(np.array([0.0, 0.0, zc]))
        for j in range(n_slots):
            a, b = ring_ids[i, j], ring_ids[i, (j + 1) % n_slots]
            tris.append([center, a, b] if i == 0 else [center, b, a])

    parts = np.zeros(len(verts), dtype=np.int64)
    parts[n_cube:] = 1
    expected = np.where(parts == 0, "discrete", "continuous").astype("<U10")
    expected[spike_index] = "none"
    mesh = Mesh(vertices=np.array(verts), triangles=np.array(tris),
                part_labels=parts)
    return mesh, expected, spike_index


def composite_annotation():
    return SymmetryAnnotation.from_json_dict({
        "symmetries_discrete": [ROT90_Z],
        "symmetries_continuous": [{"axis": [0.0, 0.0, 1.0],
                                   "offset": [0.0, 0.0, 0.0]}],
        "per_part": {"0": [{"kind": "discrete", "index": 0}],
                     "1": [{"kind": "continuous", "index": 0}]},
    })


def random_pose(rng, z_range, txy=4.0):
    A = rng.normal(size=(3, 3))
    Q, _ = np.linalg.qr(A)
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    t = np.array([rng.uniform(-txy, txy), rng.uniform(-txy, txy),
                  rng.uniform(*z_range)])
    return Pose(Q, t)


@pytest.fixture(scope="session")
def tube4():
    return star_tube(n_wedges=4)


@pytest.fixture(scope="session")
def tube2():
    return star_tube(n_wedges=2)


def tube_annotation(n_wedges):
    # the full non-identity group, listed explicitly
    mats = {4: [ROT90_Z, ROT180_Z, ROT270_Z], 2: [ROT180_Z]}[n_wedges]
    return SymmetryAnnotation.from_json_dict({"symmetries_discrete": mats})


@pytest.fixture(scope="session")
def tube4_annotation():
    return tube_annotation(4)


@pytest.fixture(scope="session")
def tube2_annotation():
    return tube_annotation(2)


@pytest.fixture(scope="session")
def ell_blob():
    return blob_mesh()


@pytest.fixture(scope="session")
def small_blob():
    return blob_mesh(subdiv=2, stretch=(1.0, 1.0, 1.0))


@pytest.fixture(scope="session")
def cam256():
    return CameraIntrinsics(fx=200.0, fy=200.0, cx=128.0, cy=128.0,
                            width=256, height=256)


@pytest.fixture(scope="session")
def cam512():
    return CameraIntrinsics(fx=280.0, fy=280.0, cx=256.0, cy=256.0,
                            width=512, height=512)


@pytest.fixture(scope="session")
def tube_renders(tube4, tube4_annotation, tube2, tube2_annotation, cam256):
    """Geometry renders for 20 poses of each tube and every annotated motion.

    Rendering is code-independent, so one geometry pass per (pose, motion)
    serves the map-invariance checks at every d.
    """
    out = {}
    rng = np.random.default_rng(41)
    for name, mesh, ann in (("tube4", tube4, tube4_annotation),
                            ("tube2", tube2, tube2_annotation)):
        motions = ann.motion_set()
        poses = [random_pose(rng, (80.0, 110.0)) for _ in range(20)]
        rows = []
        for T in poses:
            base = render_geometry(mesh, cam256, T)
            moved = [render_geometry(mesh, cam256, T.compose(m))
                     for m in motions if not is_identity_motion(m)]
            rows.append((base, moved))
        out[name] = rows
    return out
