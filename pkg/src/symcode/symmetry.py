"""Symmetry transform sets, per-vertex symmetry testing and classification.

A symmetric object admits a set of rigid motions in model space that map the
surface onto itself. Motions are represented as (R, t) pairs; a rotation
about an axis through point p maps x to R x + (p - R p). Vertices are tested
against candidate symmetries in fixed priority order: discrete beats n-fold
beats continuous beats none.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidOrder, ParseError
from .geometry import Pose, axis_angle_rotation
from .mesh import Mesh, extract_part, object_diameter

IDENTITY_TOL = 1e-9

# testing order: lower rank wins
KIND_PRIORITY = {"discrete": 0, "nfold": 1, "continuous": 2, "none": 3}

DEFAULT_THRESHOLD = 1e-3     # fraction of object diameter
DEFAULT_K_TEST = 36          # discretization used when testing continuous axes


class RigidMotion(Pose):
    """A rigid motion of the model onto itself, in model coordinates."""


def _as_unit_axis(axis) -> np.ndarray:
    a = np.asarray(axis, dtype=float).reshape(3)
    n = np.linalg.norm(a)
    if n == 0 or not np.all(np.isfinite(a)):
        raise ValueError("symmetry axis must be a nonzero finite vector")
    return a / n


def motion_about_axis(axis, point, angle: float) -> RigidMotion:
    """Rotation by `angle` about the line through `point` along `axis`."""
    R = axis_angle_rotation(_as_unit_axis(axis), angle)
    p = np.asarray(point, dtype=float).reshape(3)
    return RigidMotion(R, p - R @ p)


def is_identity_motion(m: Pose, tol: float = IDENTITY_TOL) -> bool:
    return (np.abs(m.rotation - np.eye(3)).max() <= tol
            and np.abs(m.translation).max() <= tol)


@dataclass(frozen=True)
class SymmetryTransformSet:
    """Ordered set of rigid motions; the identity is always element 0."""

    motions: tuple
    source: str = "discrete-annotated"

    def __post_init__(self):
        motions = tuple(self.motions)
        ident = [i for i, m in enumerate(motions) if is_identity_motion(m)]
        if not ident:
            motions = (RigidMotion.identity(),) + motions
        elif ident[0] != 0 or len(ident) > 1:
            first = motions[ident[0]]
            rest = [m for i, m in enumerate(motions) if i not in ident]
            motions = (first,) + tuple(rest)
        object.__setattr__(self, "motions", motions)

    def __len__(self) -> int:
        return len(self.motions)

    def __iter__(self):
        return iter(self.motions)

    def __getitem__(self, i):
        return self.motions[i]

    @property
    def non_identity(self) -> tuple:
        return self.motions[1:]


def nfold_transforms(axis, point, n: int) -> SymmetryTransformSet:
    """The n rotations of an n-fold symmetry about an axis.

    Angles are i * 2*pi/n for i = 1..n; the i = n element is the identity
    and is placed first.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidOrder(f"n-fold order must be an integer >= 2, got {n!r}")
    motions = [RigidMotion.identity()]
    for i in range(1, n):
        motions.append(motion_about_axis(axis, point, 2.0 * np.pi * i / n))
    return SymmetryTransformSet(tuple(motions), source="n-fold")


def discretize_continuous(axis, point, k: int) -> SymmetryTransformSet:
    """K evenly spaced rotations standing in for a continuous axis."""
    if not isinstance(k, (int, np.integer)) or k < 2:
        raise InvalidOrder(f"discretization count must be an integer >= 2, got {k!r}")
    s = nfold_transforms(axis, point, int(k))
    return SymmetryTransformSet(s.motions, source="continuous-discretized")


@dataclass(frozen=True)
class SymmetrySpec:
    """One candidate symmetry: none, discrete, n-fold or continuous.

    Discrete symmetries carry explicit transforms; axial kinds carry a unit
    axis direction plus a point the axis passes through.
    """

    kind: str
    axis: np.ndarray = None
    point: np.ndarray = None
    order: int = None
    transforms: tuple = None

    def __post_init__(self):
        if self.kind not in KIND_PRIORITY:
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        if self.kind in ("nfold", "continuous"):
            if self.axis is None:
                raise ValueError(f"{self.kind} symmetry needs an axis")
            axis = _as_unit_axis(self.axis)
            point = np.zeros(3) if self.point is None else np.asarray(
                self.point, dtype=float).reshape(3)
            axis.flags.writeable = False
            point.flags.writeable = False
            object.__setattr__(self, "axis", axis)
            object.__setattr__(self, "point", point)
        if self.kind == "nfold":
            if not isinstance(self.order, (int, np.integer)) or self.order < 2:
                raise InvalidOrder(f"n-fold order must be >= 2, got {self.order!r}")
            object.__setattr__(self, "order", int(self.order))
        if self.kind == "discrete":
            if not self.transforms:
                raise ValueError("discrete symmetry needs explicit transforms")
            object.__setattr__(self, "transforms", tuple(self.transforms))

    def motion_set(self, k_test: int = DEFAULT_K_TEST) -> SymmetryTransformSet:
        if self.kind == "discrete":
            return SymmetryTransformSet(self.transforms, source="discrete-annotated")
        if self.kind == "nfold":
            return nfold_transforms(self.axis, self.point, self.order)
        if self.kind == "continuous":
            return discretize_continuous(self.axis, self.point, k_test)
        return SymmetryTransformSet((RigidMotion.identity(),), source="discrete-annotated")


# ---------------------------------------------------------------------------
# per-vertex symmetry error

def symmetry_errors(points: np.ndarray, motions: SymmetryTransformSet,
                    tree: cKDTree = None) -> np.ndarray:
    """Mean nearest-vertex distance under the non-identity motions.

    For each point P_j this is mean_m || m P_j - nearest(m P_j) || over the
    non-identity members of the set; the raw sum form is this value times
    (len(motions) - 1). Identity-only sets give 0 everywhere.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if tree is None:
        tree = cKDTree(pts)
    acc = np.zeros(pts.shape[0])
    count = 0
    for m in motions.non_identity:
        moved = pts @ m.rotation.T + m.translation
        d, _ = tree.query(moved)
        acc += d
        count += 1
    if count == 0:
        return acc
    return acc / count


def symmetry_error(mesh: Mesh, j: int, motions: SymmetryTransformSet,
                   tree: cKDTree = None) -> float:
    """Symmetry error of a single vertex against a motion set."""
    if tree is None:
        tree = mesh.kdtree()
    p = mesh.vertices[int(j)]
    total = 0.0
    count = 0
    for m in motions.non_identity:
        moved = m.rotation @ p + m.translation
        d, _ = tree.query(moved)
        total += float(d)
        count += 1
    return total / count if count else 0.0


# ---------------------------------------------------------------------------
# classification

@dataclass(frozen=True)
class VertexClassification:
    """Per-vertex symmetry assignment.

    kinds[j] is one of {discrete, nfold, continuous, none}; spec_indices[j]
    indexes into `specs` (-1 when no candidate matched); errors[j] is the
    error of the assigned spec, or the best rejected error for `none`.
    """

    kinds: np.ndarray
    spec_indices: np.ndarray
    errors: np.ndarray
    specs: tuple = field(default_factory=tuple)
    threshold: float = 0.0

    def spec_for(self, j: int) -> SymmetrySpec:
        i = int(self.spec_indices[int(j)])
        if i < 0:
            return SymmetrySpec(kind="none")
        return self.specs[i]

    def counts(self) -> dict:
        kinds, counts = np.unique(self.kinds, return_counts=True)
        return {str(k): int(c) for k, c in zip(kinds, counts)}


def _ordered(specs) -> list:
    # stable: priority first, listed order within equal priority
    return sorted(specs, key=lambda s: KIND_PRIORITY[s.kind])


def classify_vertices(mesh: Mesh, candidates, threshold: float = DEFAULT_THRESHOLD,
                      k_test: int = DEFAULT_K_TEST) -> VertexClassification:
    """Assign each vertex the highest-priority symmetry it satisfies.

    candidates is either a list of SymmetrySpec applying to every part, or a
    dict {part_id: [SymmetrySpec, ...]}. The acceptance threshold is a
    fraction of the object diameter; a vertex gets the first spec (priority
    order, then listed order) whose error stays at or below it. Errors are
    measured inside the vertex's part sub-mesh, so symmetry of one part
    cannot be broken by the geometry of another.
    """
    n = mesh.vertex_count
    if not np.isfinite(threshold) or threshold <= 0:
        raise ValueError(f"threshold must be a positive fraction, got {threshold!r}")
    if k_test < 2:
        raise ValueError(f"k_test must be at least 2, got {k_test!r}")
    abs_threshold = float(threshold) * object_diameter(mesh)
    if isinstance(candidates, dict):
        per_part = {int(k): list(v) for k, v in candidates.items()}
    else:
        per_part = {int(pid): list(candidates) for pid in mesh.part_ids()}

    all_specs = []
    spec_pos = {}
    for pid in sorted(per_part):
        for spec in per_part[pid]:
            if id(spec) not in spec_pos:
                spec_pos[id(spec)] = len(all_specs)
                all_specs.append(spec)

    kinds = np.full(n, "none", dtype="<U10")
    spec_indices = np.full(n, -1, dtype=np.int64)
    errors = np.full(n, np.inf)

    for pid in sorted(int(p) for p in np.unique(mesh.part_labels)):
        specs = _ordered(per_part.get(pid, []))
        part = extract_part(mesh, pid) if len(mesh.part_ids()) > 1 else mesh
        parent = part.parent_indices
        if parent is None:
            parent = np.arange(n, dtype=np.int64)
        tree = cKDTree(part.vertices)
        unassigned = np.ones(part.vertex_count, dtype=bool)
        best = np.full(part.vertex_count, np.inf)
        for spec in specs:
            if not unassigned.any():
                break
            errs = symmetry_errors(part.vertices, spec.motion_set(k_test), tree)
            best = np.minimum(best, errs)
            hit = unassigned & (errs <= abs_threshold)
            gi = parent[hit]
            kinds[gi] = spec.kind
            spec_indices[gi] = spec_pos[id(spec)]
            errors[gi] = errs[hit]
            unassigned &= ~hit
        miss = parent[unassigned]
        errors[miss] = best[unassigned]

    return VertexClassification(kinds=kinds, spec_indices=spec_indices,
                                errors=errors, specs=tuple(all_specs),
                                threshold=abs_threshold)


# ---------------------------------------------------------------------------
# annotation document

@dataclass(frozen=True)
class SymmetryAnnotation:
    """Whole-object symmetry annotation.

    discrete holds explicit motions forming one discrete symmetry group
    (identity implied); nfold and continuous list axial symmetries. per_part
    maps a part id to the specs that apply there; when empty, every spec
    applies to every part.
    """

    discrete: tuple = ()
    nfold: tuple = ()            # SymmetrySpec, kind == "nfold"
    continuous: tuple = ()       # SymmetrySpec, kind == "continuous"
    per_part: dict = field(default_factory=dict)

    def all_specs(self) -> list:
        specs = []
        if self.discrete:
            specs.append(SymmetrySpec(kind="discrete", transforms=self.discrete))
        specs.extend(self.nfold)
        specs.extend(self.continuous)
        return _ordered(specs)

    def specs_for_part(self, part_id: int) -> list:
        if not self.per_part:
            return self.all_specs()
        return _ordered(list(self.per_part.get(int(part_id), [])))

    def candidates(self, mesh: Mesh):
        """Shape the annotation as classify_vertices candidates."""
        if not self.per_part:
            return self.all_specs()
        return {pid: self.specs_for_part(pid) for pid in
                (int(p) for p in mesh.part_ids())}

    def motion_set(self, k_continuous: int = 64) -> SymmetryTransformSet:
        """Union of every annotated motion, continuous axes discretized."""
        motions = [RigidMotion.identity()]
        seen = {_motion_key(motions[0])}
        pools = [self.discrete]
        pools += [s.motion_set().motions for s in self.nfold]
        pools += [discretize_continuous(s.axis, s.point, k_continuous).motions
                  for s in self.continuous]
        for pool in pools:
            for m in pool:
                key = _motion_key(m)
                if key not in seen:
                    seen.add(key)
                    motions.append(m)
        return SymmetryTransformSet(tuple(motions))

    def to_json_dict(self) -> dict:
        doc = {
            "symmetries_discrete": [
                [float(x) for x in m.matrix().reshape(-1)]
                for m in self.discrete if not is_identity_motion(m)
            ],
            "symmetries_continuous": [
                {"axis": s.axis.tolist(), "offset": s.point.tolist()}
                for s in self.continuous
            ],
            "nfold": [
                {"axis": s.axis.tolist(), "offset": s.point.tolist(),
                 "n": int(s.order)}
                for s in self.nfold
            ],
        }
        if self.per_part:
            doc["per_part"] = {
                str(pid): [_spec_ref(self, s) for s in specs]
                for pid, specs in self.per_part.items()
            }
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SymmetryAnnotation":
        if not isinstance(doc, dict):
            raise ParseError("annotation must be a JSON object")
        try:
            discrete = tuple(_motion_from_flat(v)
                             for v in doc.get("symmetries_discrete", []))
            continuous = tuple(
                SymmetrySpec(kind="continuous", axis=e["axis"],
                             point=e.get("offset", (0.0, 0.0, 0.0)))
                for e in doc.get("symmetries_continuous", []))
            nfold = tuple(
                SymmetrySpec(kind="nfold", axis=e["axis"],
                             point=e.get("offset", (0.0, 0.0, 0.0)),
                             order=int(e["n"]))
                for e in doc.get("nfold", []))
        except InvalidOrder:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed symmetry annotation: {exc}") from exc
        ann = cls(discrete=discrete, nfold=nfold, continuous=continuous)
        raw_parts = doc.get("per_part") or {}
        if raw_parts:
            per_part = {}
            for key, refs in raw_parts.items():
                try:
                    pid = int(key)
                    per_part[pid] = [_resolve_ref(ann, r) for r in refs]
                except (KeyError, TypeError, ValueError, IndexError) as exc:
                    raise ParseError(f"bad per_part entry for {key!r}: {exc}") from exc
            ann = cls(discrete=discrete, nfold=nfold, continuous=continuous,
                      per_part=per_part)
        return ann


def _motion_key(m: Pose) -> tuple:
    vals = np.concatenate([m.rotation.reshape(-1), m.translation])
    return tuple(np.round(vals / 1e-9).astype(np.int64).tolist())


def _motion_from_flat(values) -> RigidMotion:
    M = np.asarray(values, dtype=float).reshape(4, 4)
    if np.abs(M[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-9:
        raise ParseError("discrete symmetry matrix is not rigid (bad last row)")
    try:
        return RigidMotion(M[:3, :3], M[:3, 3])
    except ValueError as exc:
        raise ParseError(f"discrete symmetry matrix invalid: {exc}") from exc


def _spec_ref(ann: SymmetryAnnotation, spec: SymmetrySpec) -> dict:
    if spec.kind == "discrete":
        return {"kind": "discrete", "index": 0}
    if spec.kind == "nfold":
        for i, s in enumerate(ann.nfold):
            if s is spec or _axis_eq(s, spec) and s.order == spec.order:
                return {"kind": "nfold", "index": i}
    if spec.kind == "continuous":
        for i, s in enumerate(ann.continuous):
            if s is spec or _axis_eq(s, spec):
                return {"kind": "continuous", "index": i}
    if spec.kind == "none":
        return {"kind": "none", "index": 0}
    raise ValueError(f"per_part spec not present in annotation: {spec}")


def _axis_eq(a: SymmetrySpec, b: SymmetrySpec) -> bool:
    return (np.allclose(a.axis, b.axis, atol=1e-12)
            and np.allclose(a.point, b.point, atol=1e-12))


def _resolve_ref(ann: SymmetryAnnotation, ref) -> SymmetrySpec:
    if isinstance(ref, str):
        ref = {"kind": ref, "index": 0}
    kind = ref["kind"]
    index = int(ref.get("index", 0))
    if kind == "discrete":
        if not ann.discrete:
            raise ParseError("per_part references discrete but none annotated")
        return SymmetrySpec(kind="discrete", transforms=ann.discrete)
    if kind == "nfold":
        return ann.nfold[index]
    if kind == "continuous":
        return ann.continuous[index]
    if kind == "none":
        return SymmetrySpec(kind="none")
    raise ParseError(f"unknown per_part kind {kind!r}")


def load_annotation(path) -> SymmetryAnnotation:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return SymmetryAnnotation.from_json_dict(doc)


def save_annotation(ann: SymmetryAnnotation, path) -> None:
    Path(path).write_text(json.dumps(ann.to_json_dict(), indent=2))
