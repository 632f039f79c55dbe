"""One-to-many correspondence groups over classified mesh vertices.

Vertices that a symmetry maps onto each other are collected into groups.
Discrete and n-fold symmetries group by orbit (union-find over transformed
nearest-vertex edges). Continuous symmetries collapse each vertex to a
canonical in-plane point and group by quantized (r, z). Unclassified
vertices stay as singletons, so a fully asymmetric mesh degenerates to
plain one-to-one correspondences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import OrbitMismatch, ParseError
from .geometry import rotation_aligning
from .mesh import Mesh, object_diameter
from .symmetry import SymmetryTransformSet, VertexClassification

DEFAULT_MERGE_TOLERANCE = 1e-4   # fraction of object diameter


@dataclass(frozen=True)
class CorrespondenceGroup:
    """A set of symmetry-equivalent vertices and its representative point.

    main_source is the position of the main vertex inside `members` for
    discrete/n-fold/none groups, or the string "synthetic" for continuous
    groups whose representative is a constructed canonical point.
    """

    members: tuple
    main: np.ndarray
    kind: str
    main_source: object = "synthetic"

    def __post_init__(self):
        members = tuple(int(i) for i in self.members)
        if not members:
            raise ValueError("correspondence group cannot be empty")
        main = np.asarray(self.main, dtype=float).reshape(3)
        main.flags.writeable = False
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "main", main)


@dataclass(frozen=True)
class CorrespondenceSet:
    """Groups partitioning all mesh vertices, plus a vertex -> group index."""

    groups: tuple
    vertex_to_group: np.ndarray
    tolerance: float

    def __post_init__(self):
        lookup = np.ascontiguousarray(np.asarray(self.vertex_to_group, np.int64))
        lookup.flags.writeable = False
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "vertex_to_group", lookup)

    def __len__(self) -> int:
        return len(self.groups)

    def group_of(self, j: int) -> CorrespondenceGroup:
        return self.groups[int(self.vertex_to_group[int(j)])]

    def main_points(self) -> np.ndarray:
        return np.array([g.main for g in self.groups])

    def to_json_dict(self) -> dict:
        return {
            "groups": [
                {
                    "members": list(g.members),
                    "main": [float(x) for x in g.main],
                    "kind": g.kind,
                    "main_source": g.main_source
                    if isinstance(g.main_source, str) else int(g.main_source),
                }
                for g in self.groups
            ],
            "tolerance": float(self.tolerance),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CorrespondenceSet":
        try:
            groups = tuple(
                CorrespondenceGroup(
                    members=tuple(g["members"]),
                    main=g["main"],
                    kind=g["kind"],
                    main_source=g.get("main_source", "synthetic"),
                )
                for g in doc["groups"]
            )
            tolerance = float(doc["tolerance"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed correspondence document: {exc}") from exc
        return cls(groups=groups,
                   vertex_to_group=_lookup_from_groups(groups),
                   tolerance=tolerance)


def _lookup_from_groups(groups) -> np.ndarray:
    total = sum(len(g.members) for g in groups)
    lookup = np.full(total, -1, dtype=np.int64)
    for gi, g in enumerate(groups):
        idx = np.asarray(g.members, dtype=np.int64)
        if idx.max() >= total or np.any(lookup[idx] >= 0):
            raise ParseError("groups do not partition the vertex range")
        lookup[idx] = gi
    if np.any(lookup < 0):
        raise ParseError("groups do not cover every vertex")
    return lookup


def save_correspondences(cs: CorrespondenceSet, path) -> None:
    Path(path).write_text(json.dumps(cs.to_json_dict()))


def load_correspondences(path) -> CorrespondenceSet:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return CorrespondenceSet.from_json_dict(doc)


# ---------------------------------------------------------------------------
# building blocks

def orbit(mesh: Mesh, j: int, motions: SymmetryTransformSet,
          tolerance: float) -> list:
    """Vertices reachable from j by the motion set, within tolerance.

    Every motion image must land within `tolerance` of some vertex, else the
    annotation and mesh disagree and OrbitMismatch is raised.
    """
    tree = mesh.kdtree()
    p = mesh.vertices[int(j)]
    found = set()
    for mi, m in enumerate(motions):
        moved = m.rotation @ p + m.translation
        d, idx = tree.query(moved)
        if d > tolerance:
            raise OrbitMismatch(vertex_index=int(j), motion_index=mi,
                                distance=float(d))
        # collect exact-distance ties so the orbit does not depend on
        # kd-tree internals
        for cand in tree.query_ball_point(moved, float(d) * (1 + 1e-12) + 1e-300):
            if np.linalg.norm(mesh.vertices[cand] - moved) <= d * (1 + 1e-12):
                found.add(int(cand))
    return sorted(found)


def canonicalize_continuous(point, axis, axis_point=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Collapse a point onto the half-plane of its continuous symmetry.

    The axis frame is chosen by the minimal rotation taking the axis to +z
    and moving axis_point to the origin; there the point becomes
    (sqrt(x^2 + y^2), 0, z). The result stays in that axis-aligned frame.
    """
    return canonicalize_continuous_many(
        np.asarray(point, float).reshape(1, 3), axis, axis_point)[0]


def canonicalize_continuous_many(points, axis, axis_point=(0.0, 0.0, 0.0)) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    a = np.asarray(axis, dtype=float).reshape(3)
    a = a / np.linalg.norm(a)
    R = rotation_aligning(a, np.array([0.0, 0.0, 1.0]))
    q = (pts - np.asarray(axis_point, float).reshape(3)) @ R.T
    out = np.zeros_like(q)
    out[:, 0] = np.hypot(q[:, 0], q[:, 1])
    out[:, 2] = q[:, 2]
    return out


def main_vertex_index(points: np.ndarray) -> int:
    """Index of the member maximizing |x|+|y|+|z|; ties -> lexicographically
    greatest (x, y, z)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise ValueError("empty member list")
    sums = np.abs(pts).sum(axis=1)
    best = np.flatnonzero(sums == sums.max())
    order = np.lexsort((pts[best, 2], pts[best, 1], pts[best, 0]))
    return int(best[order[-1]])


def main_vertex(points: np.ndarray) -> np.ndarray:
    """The group member chosen as the representative point."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return pts[main_vertex_index(pts)].copy()


# ---------------------------------------------------------------------------
# full construction

def build_correspondences(mesh: Mesh, classification: VertexClassification,
                          tolerance: float = None) -> CorrespondenceSet:
    """Partition vertices into correspondence groups.

    Grouping runs per part and per assigned spec, so orbits never cross part
    boundaries. `tolerance` is an absolute length; when omitted it defaults
    to 1e-4 of the object diameter.
    """
    n = mesh.vertex_count
    if classification.kinds.shape[0] != n:
        raise ValueError("classification does not match the mesh")
    if tolerance is None:
        tolerance = DEFAULT_MERGE_TOLERANCE * object_diameter(mesh)
    tolerance = float(tolerance)

    raw_groups = []   # (smallest member, CorrespondenceGroup)
    for pid in np.unique(mesh.part_labels):
        in_part = np.flatnonzero(mesh.part_labels == pid)
        for spec_i in np.unique(classification.spec_indices[in_part]):
            sel = in_part[classification.spec_indices[in_part] == spec_i]
            kind = ("none" if spec_i < 0
                    else classification.specs[int(spec_i)].kind)
            if kind == "none":
                for j in sel:
                    raw_groups.append(CorrespondenceGroup(
                        members=(int(j),), main=mesh.vertices[j],
                        kind="none", main_source=int(j)))
            elif kind == "continuous":
                spec = classification.specs[int(spec_i)]
                raw_groups.extend(_continuous_groups(
                    mesh, sel, spec.axis, spec.point, tolerance))
            else:
                spec = classification.specs[int(spec_i)]
                raw_groups.extend(_orbit_groups(
                    mesh, sel, spec.motion_set(), tolerance, kind))

    raw_groups.sort(key=lambda g: g.members[0])
    return CorrespondenceSet(groups=tuple(raw_groups),
                             vertex_to_group=_lookup_from_groups(raw_groups),
                             tolerance=tolerance)


def _orbit_groups(mesh, sel, motions, tolerance, kind):
    """Union-find over motion-image edges inside one vertex subset."""
    P = mesh.vertices[sel]
    k = sel.size
    tree = cKDTree(P)
    rows = [np.arange(k)]
    cols = [np.arange(k)]
    for mi, m in enumerate(motions.non_identity, start=1):
        moved = P @ m.rotation.T + m.translation
        d, idx = tree.query(moved)
        bad = np.flatnonzero(d > tolerance)
        if bad.size:
            b = int(bad[0])
            raise OrbitMismatch(vertex_index=int(sel[b]), motion_index=mi,
                                distance=float(d[b]))
        rows.append(np.arange(k))
        cols.append(idx)
    graph = coo_matrix(
        (np.ones(sum(r.size for r in rows)), (np.concatenate(rows), np.concatenate(cols))),
        shape=(k, k))
    n_comp, labels = connected_components(graph, directed=False)
    groups = []
    for c in range(n_comp):
        members = sel[np.flatnonzero(labels == c)]
        pts = mesh.vertices[members]
        mi = main_vertex_index(pts)
        groups.append(CorrespondenceGroup(
            members=tuple(int(i) for i in members), main=pts[mi],
            kind=kind, main_source=int(members[mi])))
    return groups


def _continuous_groups(mesh, sel, axis, axis_point, tolerance):
    """Group by quantized canonical (r, z) cells of size `tolerance`."""
    canon = canonicalize_continuous_many(mesh.vertices[sel], axis, axis_point)
    keys = np.round(canon[:, [0, 2]] / tolerance).astype(np.int64)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    groups = []
    for c in np.unique(inverse):
        pick = np.flatnonzero(inverse == c)
        members = sel[pick]
        main = canon[pick].mean(axis=0)
        main[1] = 0.0
        groups.append(CorrespondenceGroup(
            members=tuple(int(i) for i in members), main=main,
            kind="continuous", main_source="synthetic"))
    return groups
