"""Hierarchical d-bit binary surface codes over correspondence groups.

Each correspondence group's main point enters a recursive balanced two-way
clustering; at every split the children inherit codes (c << 1) and
(c << 1) + 1, so after d iterations every group holds a d-bit code whose
k-th bit (counting the first split as bit 0, the most significant) records
which side of the k-th split it fell on. Vertices inherit the code of their
group, which makes all symmetry-equivalent vertices share one code.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .correspondence import CorrespondenceSet, build_correspondences
from .errors import (BitOutOfRange, InvalidBits, ParseError, TooFewPoints,
                     UnassignedCode)
from .mesh import Mesh, farthest_pair
from .symmetry import (DEFAULT_K_TEST, DEFAULT_THRESHOLD, SymmetryAnnotation,
                       classify_vertices)

MAX_BITS = 30
DEFAULT_BITS = 16

_LLOYD_ITERS = 100
_REPAIR_ITERS = 100


def balanced_two_means(points: np.ndarray, seed: int = 0):
    """Split points into two clusters whose sizes differ by at most 1.

    The centroids start at the farthest pair (smallest-index pair on ties),
    run standard Lloyd updates, then a balance repair: points ranked by
    (distance to A - distance to B) with index tie-break, the first
    ceil(n/2) go to A, centroids recomputed, repeated to a fixed point.
    Deterministic for any seed; the seed is accepted so callers can thread
    one through without special-casing.
    """
    del seed  # tie-breaks are index-based, so the result is seed-independent
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = pts.shape[0]
    if n < 2:
        raise TooFewPoints("balanced split needs at least 2 points")
    i, j, _ = farthest_pair(pts)
    ca, cb = pts[i].copy(), pts[j].copy()

    assign = None
    for _ in range(_LLOYD_ITERS):
        da = np.linalg.norm(pts - ca, axis=1)
        db = np.linalg.norm(pts - cb, axis=1)
        new_assign = da <= db
        if not new_assign.any() or new_assign.all():
            break
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        ca = pts[assign].mean(axis=0)
        cb = pts[~assign].mean(axis=0)

    half = (n + 1) // 2
    assign = None
    for _ in range(_REPAIR_ITERS):
        da = np.linalg.norm(pts - ca, axis=1)
        db = np.linalg.norm(pts - cb, axis=1)
        order = np.lexsort((np.arange(n), da - db))
        new_assign = np.zeros(n, dtype=bool)
        new_assign[order[:half]] = True
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        ca = pts[assign].mean(axis=0)
        cb = pts[~assign].mean(axis=0)

    a = np.flatnonzero(assign)
    b = np.flatnonzero(~assign)
    return a, b


@dataclass(frozen=True)
class SplitNode:
    """One internal node of the encoding tree."""

    prefix: int
    depth: int
    centroid_a: tuple
    centroid_b: tuple


@dataclass(frozen=True)
class SurfaceEncoding:
    """d-bit codes for groups and vertices, plus the split tree."""

    d: int
    kind: str
    seed: int
    group_codes: np.ndarray       # (G,) uint32
    vertex_codes: np.ndarray      # (n,) uint32
    group_mains: np.ndarray       # (G, 3)
    group_members: tuple          # tuple of tuples of vertex indices
    tree: tuple = ()              # SplitNode records, construction order

    def __post_init__(self):
        gc = np.ascontiguousarray(np.asarray(self.group_codes, np.uint32))
        vc = np.ascontiguousarray(np.asarray(self.vertex_codes, np.uint32))
        gm = np.ascontiguousarray(np.asarray(self.group_mains, float)).reshape(-1, 3)
        if self.d < 1 or self.d > MAX_BITS:
            raise InvalidBits(f"d must be in [1, {MAX_BITS}], got {self.d}")
        if gc.size and int(gc.max()) >= (1 << self.d):
            raise ValueError("group code exceeds d bits")
        for arr in (gc, vc, gm):
            arr.flags.writeable = False
        object.__setattr__(self, "group_codes", gc)
        object.__setattr__(self, "vertex_codes", vc)
        object.__setattr__(self, "group_mains", gm)
        object.__setattr__(self, "group_members", tuple(
            tuple(int(i) for i in m) for m in self.group_members))
        object.__setattr__(self, "tree", tuple(self.tree))

    @property
    def group_count(self) -> int:
        return int(self.group_codes.shape[0])

    @property
    def vertex_count(self) -> int:
        return int(self.vertex_codes.shape[0])

    def code_of(self, j: int) -> int:
        return int(self.vertex_codes[int(j)])

    def decode(self, code: int):
        """Main point and member vertices for a code.

        When group count exceeds the code space, several groups can share a
        leaf code; the members union is returned with the lowest-indexed
        group's main point.
        """
        code = int(code)
        if code < 0 or code >= (1 << self.d):
            raise UnassignedCode(f"code {code} outside [0, 2^{self.d})")
        hits = np.flatnonzero(self.group_codes == code)
        if hits.size == 0:
            raise UnassignedCode(f"code {code} was never assigned")
        members = sorted({i for g in hits for i in self.group_members[g]})
        return self.group_mains[hits[0]].copy(), members


def decode(encoding: SurfaceEncoding, code: int):
    return encoding.decode(code)


def code_bit(codes, k: int, d: int):
    """Bit k of a code, k = 0 being the first split (most significant)."""
    if k < 0 or k >= d:
        raise BitOutOfRange(f"bit {k} outside [0, {d})")
    return (np.asarray(codes, dtype=np.uint32) >> (d - 1 - k)) & 1


def build_encoding(points: np.ndarray, d: int, seed: int = 0,
                   kind: str = "symcode", group_members=None,
                   vertex_to_group=None) -> SurfaceEncoding:
    """Assign d-bit codes to points by recursive balanced splitting.

    Sub-groups that reach a single point stop splitting early; their
    remaining bits are zero, i.e. the final code is the prefix shifted left
    by the unused depth.
    """
    if not isinstance(d, (int, np.integer)) or d < 1 or d > MAX_BITS:
        raise InvalidBits(f"d must be an integer in [1, {MAX_BITS}], got {d!r}")
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    g = pts.shape[0]
    if g < 1:
        raise TooFewPoints("need at least one point to encode")
    codes = np.zeros(g, dtype=np.uint32)
    tree = []

    def split(idx: np.ndarray, prefix: int, depth: int):
        if depth == d:
            codes[idx] = prefix
            return
        if idx.size <= 1:
            codes[idx] = prefix << (d - depth)
            return
        a, b = balanced_two_means(pts[idx], seed)
        tree.append(SplitNode(
            prefix=prefix, depth=depth,
            centroid_a=tuple(float(x) for x in pts[idx[a]].mean(axis=0)),
            centroid_b=tuple(float(x) for x in pts[idx[b]].mean(axis=0))))
        split(idx[a], prefix << 1, depth + 1)
        split(idx[b], (prefix << 1) + 1, depth + 1)

    split(np.arange(g), 0, 0)

    if group_members is None:
        group_members = tuple((int(i),) for i in range(g))
    if vertex_to_group is None:
        vertex_codes = codes.copy()
    else:
        vertex_codes = codes[np.asarray(vertex_to_group, dtype=np.int64)]
    return SurfaceEncoding(d=int(d), kind=kind, seed=int(seed),
                           group_codes=codes, vertex_codes=vertex_codes,
                           group_mains=pts, group_members=group_members,
                           tree=tuple(tree))


def encode_mesh_symcode(mesh: Mesh, annotation, d: int = DEFAULT_BITS,
                        seed: int = 0, threshold: float = DEFAULT_THRESHOLD,
                        k_test: int = DEFAULT_K_TEST,
                        merge_tolerance: float = None,
                        correspondences: CorrespondenceSet = None) -> SurfaceEncoding:
    """Full symmetry-aware encoding pipeline for one mesh.

    annotation is a SymmetryAnnotation, or candidates accepted by
    classify_vertices. A prebuilt CorrespondenceSet skips classification.
    """
    if correspondences is None:
        if isinstance(annotation, SymmetryAnnotation):
            candidates = annotation.candidates(mesh)
        else:
            candidates = annotation
        cls = classify_vertices(mesh, candidates, threshold=threshold,
                                k_test=k_test)
        correspondences = build_correspondences(mesh, cls,
                                                tolerance=merge_tolerance)
    mains = correspondences.main_points()
    members = tuple(g.members for g in correspondences.groups)
    return build_encoding(mains, d=d, seed=seed, kind="symcode",
                          group_members=members,
                          vertex_to_group=correspondences.vertex_to_group)


def encode_mesh_one_to_one(mesh: Mesh, d: int = DEFAULT_BITS,
                           seed: int = 0) -> SurfaceEncoding:
    """Baseline encoding over raw vertex positions, no symmetry handling."""
    return build_encoding(mesh.vertices, d=d, seed=seed, kind="one-to-one")


# ---------------------------------------------------------------------------
# serialization

_JSON_LIMIT = 1024   # vertex count at or below which the pure-JSON form is used


def _header_dict(enc: SurfaceEncoding) -> dict:
    return {
        "kind": enc.kind,
        "d": int(enc.d),
        "seed": int(enc.seed),
        "group_count": enc.group_count,
        "vertex_count": enc.vertex_count,
        "group_codes": [int(c) for c in enc.group_codes],
        "group_mains": [[float(x) for x in m] for m in enc.group_mains],
        "group_members": [list(m) for m in enc.group_members],
        "tree": [
            {"prefix": int(t.prefix), "depth": int(t.depth),
             "centroid_a": list(t.centroid_a), "centroid_b": list(t.centroid_b)}
            for t in enc.tree
        ],
    }


def _canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def content_hash(enc: SurfaceEncoding) -> str:
    """sha256 over the canonical header and the little-endian code bytes."""
    h = hashlib.sha256()
    h.update(_canonical_json(_header_dict(enc)).encode())
    h.update(np.ascontiguousarray(enc.vertex_codes, dtype="<u4").tobytes())
    return h.hexdigest()


def save_encoding(enc: SurfaceEncoding, path, binary: bool = None) -> None:
    """Write an encoding file.

    Large meshes get a one-line JSON header followed by raw 32-bit
    little-endian per-vertex codes; small meshes get a single JSON document
    with the codes inline. Both carry a sha256 of the code bytes.
    """
    if binary is None:
        binary = enc.vertex_count > _JSON_LIMIT
    doc = _header_dict(enc)
    code_bytes = np.ascontiguousarray(enc.vertex_codes, dtype="<u4").tobytes()
    doc["sha256"] = hashlib.sha256(code_bytes).hexdigest()
    if binary:
        doc["format"] = "binary"
        with open(path, "wb") as fh:
            fh.write(_canonical_json(doc).encode())
            fh.write(b"\n")
            fh.write(code_bytes)
    else:
        doc["format"] = "json"
        doc["vertex_codes"] = [int(c) for c in enc.vertex_codes]
        Path(path).write_text(_canonical_json(doc))


def load_encoding(path) -> SurfaceEncoding:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    head = raw if nl < 0 else raw[:nl]
    try:
        doc = json.loads(head.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: bad encoding header: {exc}") from exc
    try:
        if doc.get("format") == "binary":
            n = int(doc["vertex_count"])
            body = raw[nl + 1: nl + 1 + 4 * n]
            if len(body) != 4 * n:
                raise ParseError(f"{path}: truncated code section")
            vertex_codes = np.frombuffer(body, dtype="<u4").astype(np.uint32)
        else:
            vertex_codes = np.asarray(doc["vertex_codes"], dtype=np.uint32)
        if "sha256" in doc:
            got = hashlib.sha256(
                np.ascontiguousarray(vertex_codes, "<u4").tobytes()).hexdigest()
            if got != doc["sha256"]:
                raise ParseError(f"{path}: code section hash mismatch")
        enc = SurfaceEncoding(
            d=int(doc["d"]), kind=doc["kind"], seed=int(doc.get("seed", 0)),
            group_codes=np.asarray(doc["group_codes"], dtype=np.uint32),
            vertex_codes=vertex_codes,
            group_mains=np.asarray(doc["group_mains"], dtype=float),
            group_members=tuple(tuple(m) for m in doc["group_members"]),
            tree=tuple(SplitNode(prefix=t["prefix"], depth=t["depth"],
                                 centroid_a=tuple(t["centroid_a"]),
                                 centroid_b=tuple(t["centroid_b"]))
                       for t in doc.get("tree", [])))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed encoding file: {exc}") from exc
    return enc
