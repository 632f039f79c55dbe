"""Triangle mesh container, PLY/OBJ I/O and geometric queries.

Model units are millimetres by dataset convention; nothing converts units.
Meshes are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import DegenerateMesh, ParseError, UnknownPart, UnsupportedFeature

_BRUTE_FORCE_LIMIT = 4096


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh.

    vertices: (n, 3) float64, finite.
    triangles: (m, 3) int64 vertex indices, all < n.
    part_labels: (n,) int64 per-vertex part id; a single part 0 by default.
    parent_indices: indices into a parent mesh when this mesh was produced
        by extract_part, else None.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    part_labels: np.ndarray = None
    parent_indices: np.ndarray = None

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("vertices must be (n, 3)")
        if v.shape[0] < 1:
            raise ValueError("mesh needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertex coordinates must be finite")
        t = np.ascontiguousarray(np.asarray(
            self.triangles if self.triangles is not None else np.zeros((0, 3)),
            dtype=np.int64))
        if t.size and (t.min() < 0 or t.max() >= v.shape[0]):
            raise ValueError("triangle indices out of range")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ValueError("triangles must be (m, 3)")
        labels = self.part_labels
        if labels is None:
            labels = np.zeros(v.shape[0], dtype=np.int64)
        labels = np.ascontiguousarray(np.asarray(labels, dtype=np.int64))
        if labels.shape != (v.shape[0],):
            raise ValueError("part_labels must be (n,)")
        parent = self.parent_indices
        if parent is not None:
            parent = np.ascontiguousarray(np.asarray(parent, dtype=np.int64))
        for arr in (v, t, labels) + ((parent,) if parent is not None else ()):
            arr.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "part_labels", labels)
        object.__setattr__(self, "parent_indices", parent)

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    def part_ids(self) -> np.ndarray:
        return np.unique(self.part_labels)

    def with_part_labels(self, labels: np.ndarray) -> "Mesh":
        return Mesh(self.vertices, self.triangles, labels, self.parent_indices)

    def kdtree(self) -> cKDTree:
        # cKDTree is cheap to rebuild; callers that query in bulk cache it.
        return cKDTree(self.vertices)


# ---------------------------------------------------------------------------
# file I/O

def load_mesh(path, fmt: str = None) -> Mesh:
    """Load a PLY (ascii or binary little-endian) or OBJ mesh.

    Quads are fan-triangulated; faces with more than 4 vertices raise
    UnsupportedFeature. Part labels default to a single part 0.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    fmt = fmt.lower()
    if fmt == "ply":
        return _load_ply(path)
    if fmt == "obj":
        return _load_obj(path)
    raise UnsupportedFeature(f"unsupported mesh format: {fmt}")


_PLY_TYPES = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}


def _load_ply(path: Path) -> Mesh:
    raw = path.read_bytes()
    end = raw.find(b"end_header")
    if not raw.startswith(b"ply") or end < 0:
        raise ParseError(f"{path}: not a valid PLY header")
    nl = raw.find(b"\n", end)
    if nl < 0:
        raise ParseError(f"{path}: truncated PLY header")
    header = raw[:nl].decode("ascii", errors="replace").splitlines()
    body = raw[nl + 1:]

    fmt = None
    elements = []  # (name, count, [(prop_name, type) or ('list', count_t, item_t, name)])
    for line in header[1:]:
        tokens = line.strip().split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) < 3:
                raise ParseError(f"{path}: malformed element line")
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError(f"{path}: property before element")
            if tokens[1] == "list":
                elements[-1][2].append(("list", tokens[2], tokens[3], tokens[4]))
            else:
                elements[-1][2].append((tokens[2], tokens[1]))
    if fmt is None:
        raise ParseError(f"{path}: PLY header missing format line")
    if fmt not in ("ascii", "binary_little_endian"):
        raise UnsupportedFeature(f"{path}: PLY format {fmt} not supported")
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise ParseError(f"{path}: PLY has no vertex element")

    if fmt == "ascii":
        vertices, faces = _parse_ply_ascii(path, body, elements)
    else:
        vertices, faces = _parse_ply_binary(path, body, elements)
    triangles = _triangulate(path, faces)
    if len(vertices) == 0:
        raise ParseError(f"{path}: mesh has no vertices")
    return Mesh(np.asarray(vertices, dtype=np.float64),
                np.asarray(triangles, dtype=np.int64).reshape(-1, 3))


def _parse_ply_ascii(path, body, elements):
    lines = [ln for ln in body.decode("ascii", errors="replace").splitlines()
             if ln.strip()]
    cursor = 0
    vertices, faces = [], []
    for name, count, props in elements:
        if cursor + count > len(lines):
            raise ParseError(f"{path}: PLY body truncated in element {name}")
        chunk = lines[cursor:cursor + count]
        cursor += count
        if name == "vertex":
            try:
                idx = [i for i, p in enumerate(props) if p[0] in ("x", "y", "z")]
                if len(idx) != 3:
                    raise ParseError(f"{path}: vertex element lacks x/y/z")
                for ln in chunk:
                    f = ln.split()
                    vertices.append((float(f[idx[0]]), float(f[idx[1]]), float(f[idx[2]])))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}: bad vertex line: {exc}") from exc
        elif name == "face":
            try:
                for ln in chunk:
                    f = ln.split()
                    n = int(f[0])
                    faces.append([int(x) for x in f[1:1 + n]])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}: bad face line: {exc}") from exc
    return vertices, faces


def _parse_ply_binary(path, body, elements):
    offset = 0
    vertices, faces = [], []
    for name, count, props in elements:
        if name == "vertex":
            if any(p[0] == "list" for p in props):
                raise UnsupportedFeature(f"{path}: list property on vertex element")
            fmt = "<" + "".join(_PLY_TYPES[p[1]][0] for p in props)
            stride = struct.calcsize(fmt)
            field_names = [p[0] for p in props]
            try:
                xi, yi, zi = (field_names.index(c) for c in "xyz")
            except ValueError as exc:
                raise ParseError(f"{path}: vertex element lacks x/y/z") from exc
            need = stride * count
            if offset + need > len(body):
                raise ParseError(f"{path}: PLY body truncated in vertices")
            for rec in struct.iter_unpack(fmt, body[offset:offset + need]):
                vertices.append((rec[xi], rec[yi], rec[zi]))
            offset += need
        elif name == "face":
            if len(props) != 1 or props[0][0] != "list":
                raise UnsupportedFeature(f"{path}: face element must be a single list")
            _, count_t, item_t, _ = props[0]
            cfmt, csize = _PLY_TYPES[count_t]
            ifmt, isize = _PLY_TYPES[item_t]
            for _ in range(count):
                if offset + csize > len(body):
                    raise ParseError(f"{path}: PLY body truncated in faces")
                n = struct.unpack_from("<" + cfmt, body, offset)[0]
                offset += csize
                if offset + n * isize > len(body):
                    raise ParseError(f"{path}: PLY body truncated in faces")
                faces.append(list(struct.unpack_from("<" + str(n) + ifmt, body, offset)))
                offset += n * isize
        else:
            # skip unknown fixed-size elements
            if any(p[0] == "list" for p in props):
                raise UnsupportedFeature(f"{path}: cannot skip list element {name}")
            stride = sum(_PLY_TYPES[p[1]][1] for p in props)
            offset += stride * count
    return vertices, faces


def _load_obj(path: Path) -> Mesh:
    vertices, faces = [], []
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        if tokens[0] == "v":
            try:
                vertices.append(tuple(float(x) for x in tokens[1:4]))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{lineno}: bad vertex record") from exc
        elif tokens[0] == "f":
            try:
                # "f v", "f v/vt", "f v/vt/vn", "f v//vn"; OBJ indices are 1-based,
                # negative indices count from the end.
                idx = []
                for tok in tokens[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                faces.append(idx)
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{lineno}: bad face record") from exc
    if not vertices:
        raise ParseError(f"{path}: OBJ has no vertices")
    triangles = _triangulate(path, faces)
    return Mesh(np.asarray(vertices, dtype=np.float64),
                np.asarray(triangles, dtype=np.int64).reshape(-1, 3))


def _triangulate(path, faces):
    triangles = []
    for face in faces:
        if len(face) == 3:
            triangles.append(face)
        elif len(face) == 4:  # fan triangulation
            triangles.append([face[0], face[1], face[2]])
            triangles.append([face[0], face[2], face[3]])
        else:
            raise UnsupportedFeature(
                f"{path}: {len(face)}-gon faces are not supported (triangulate first)")
    return triangles


def save_mesh(mesh: Mesh, path, fmt: str = None, binary: bool = False) -> None:
    """Write a mesh as PLY (ascii or binary little-endian) or OBJ."""
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    fmt = fmt.lower()
    if fmt == "ply":
        if binary:
            head = (
                "ply\nformat binary_little_endian 1.0\n"
                f"element vertex {mesh.vertex_count}\n"
                "property double x\nproperty double y\nproperty double z\n"
                f"element face {mesh.triangle_count}\n"
                "property list uchar int vertex_indices\nend_header\n"
            ).encode("ascii")
            with open(path, "wb") as fh:
                fh.write(head)
                fh.write(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
                for tri in mesh.triangles:
                    fh.write(struct.pack("<B3i", 3, *map(int, tri)))
        else:
            with open(path, "w") as fh:
                fh.write("ply\nformat ascii 1.0\n")
                fh.write(f"element vertex {mesh.vertex_count}\n")
                fh.write("property float x\nproperty float y\nproperty float z\n")
                fh.write(f"element face {mesh.triangle_count}\n")
                fh.write("property list uchar int vertex_indices\nend_header\n")
                for v in mesh.vertices:
                    fh.write(f"{v[0]:.6f} {v[1]:.6f} {v[2]:.6f}\n")
                for t in mesh.triangles:
                    fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
    elif fmt == "obj":
        with open(path, "w") as fh:
            for v in mesh.vertices:
                fh.write(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}\n")
            for t in mesh.triangles:
                fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
    else:
        raise UnsupportedFeature(f"unsupported mesh format: {fmt}")


def load_part_labels(mesh: Mesh, path) -> Mesh:
    """Apply a part-label sidecar `{"parts": [{"id", "vertex_indices"}]}`."""
    doc = json.loads(Path(path).read_text())
    labels = parts_document_to_labels(doc, mesh.vertex_count)
    return mesh.with_part_labels(labels)


def parts_document_to_labels(doc: dict, vertex_count: int) -> np.ndarray:
    labels = np.full(vertex_count, -1, dtype=np.int64)
    for part in doc.get("parts", []):
        idx = np.asarray(part["vertex_indices"], dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= vertex_count):
            raise ParseError("part sidecar references out-of-range vertices")
        labels[idx] = int(part["id"])
    if np.any(labels < 0):
        raise ParseError("part sidecar does not cover every vertex (partition required)")
    return labels


def labels_to_parts_document(labels: np.ndarray) -> dict:
    return {
        "parts": [
            {"id": int(pid), "vertex_indices": np.flatnonzero(labels == pid).tolist()}
            for pid in np.unique(labels)
        ]
    }


def save_part_labels(mesh: Mesh, path) -> None:
    Path(path).write_text(json.dumps(labels_to_parts_document(mesh.part_labels)))


# ---------------------------------------------------------------------------
# geometric queries

def farthest_pair(points: np.ndarray) -> tuple[int, int, float]:
    """Exact farthest vertex pair; ties broken by smallest (i, j).

    Uses the convex hull to prune when the set is large, falling back to a
    chunked brute-force scan for degenerate (flat/collinear) sets. Both paths
    reproduce the O(n^2) maximum exactly.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n < 2:
        raise DegenerateMesh("need at least 2 vertices")
    if n > _BRUTE_FORCE_LIMIT:
        try:
            hull = ConvexHull(pts)
            sub = np.sort(hull.vertices)
            i, j, d = _brute_force_pair(pts[sub])
            return int(sub[i]), int(sub[j]), d
        except QhullError:
            pass
    return _brute_force_pair(pts)


def _brute_force_pair(pts: np.ndarray) -> tuple[int, int, float]:
    n = pts.shape[0]
    best = (-1.0, 0, 1)
    chunk = max(1, int(2e7) // max(n, 1))
    sq = np.einsum("ij,ij->i", pts, pts)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (pts[start:stop] @ pts.T)
        # only consider j > i to get the smallest-(i, j) tie-break for free
        rows = np.arange(start, stop)
        mask = rows[:, None] >= np.arange(n)[None, :]
        d2[mask] = -np.inf
        flat = np.argmax(d2)
        r, c = divmod(flat, n)
        val = d2[r, c]
        if val > best[0]:
            best = (val, start + r, c)
    d = float(np.sqrt(max(best[0], 0.0)))
    return best[1], best[2], d


def object_diameter(mesh: Mesh) -> float:
    """Maximum pairwise vertex distance."""
    if mesh.vertex_count < 2:
        raise DegenerateMesh("diameter needs at least 2 vertices")
    return farthest_pair(mesh.vertices)[2]


def nearest_vertex(mesh: Mesh, point, tree: cKDTree = None) -> tuple[int, float]:
    """Index of the closest vertex to `point`; ties -> smallest index.

    Matches the linear-scan contract exactly: when several vertices are
    equidistant the smallest index wins.
    """
    if tree is None:
        tree = mesh.kdtree()
    point = np.asarray(point, dtype=float)
    d, i = tree.query(point)
    # resolve potential ties within an exact-equality ball
    radius = d * (1.0 + 1e-12) + 1e-300
    candidates = tree.query_ball_point(point, radius)
    if len(candidates) > 1:
        cand = np.sort(np.asarray(candidates, dtype=np.int64))
        dists = np.linalg.norm(mesh.vertices[cand] - point, axis=1)
        dmin = dists.min()
        i = int(cand[np.flatnonzero(dists == dmin)[0]])
        d = float(dmin)
    return int(i), float(d)


def extract_part(mesh: Mesh, part_id: int) -> Mesh:
    """Sub-mesh of one part; keeps triangles fully inside the part.

    The result records the vertex index mapping back to the parent in
    `parent_indices`.
    """
    keep = np.flatnonzero(mesh.part_labels == int(part_id))
    if keep.size == 0:
        raise UnknownPart(f"part {part_id} not present")
    remap = np.full(mesh.vertex_count, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    tri = mesh.triangles
    inside = np.all(np.isin(tri, keep), axis=1) if tri.size else np.zeros(0, bool)
    new_tri = remap[tri[inside]] if tri.size else tri
    return Mesh(mesh.vertices[keep], new_tri,
                part_labels=np.full(keep.size, int(part_id)),
                parent_indices=keep)


def decimate_mesh(mesh: Mesh, max_vertices: int) -> tuple[Mesh, np.ndarray]:
    """Voxel-grid decimation for display payloads.

    Returns (decimated mesh, mapping) where mapping[i] is the full-mesh
    vertex index the i-th decimated vertex represents. Deterministic: the
    lowest-index vertex of each occupied cell is kept.
    """
    n = mesh.vertex_count
    if n <= max_vertices:
        return mesh, np.arange(n, dtype=np.int64)
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    extent = float(np.max(hi - lo))
    if extent <= 0:
        keep = np.arange(min(n, max_vertices), dtype=np.int64)
    else:
        # binary-search the cell size that lands under the cap
        cells_per_axis = int(np.ceil(max_vertices ** (1.0 / 3.0))) * 2
        keep = None
        for _ in range(24):
            size = extent / cells_per_axis
            key = np.floor((mesh.vertices - lo) / size).astype(np.int64)
            _, first = np.unique(key, axis=0, return_index=True)
            if first.size <= max_vertices:
                keep = np.sort(first)
                cells_per_axis = int(cells_per_axis * 1.3) + 1
                continue
            break
        if keep is None:
            keep = np.arange(max_vertices, dtype=np.int64)
    remap_tree = cKDTree(mesh.vertices[keep])
    _, owner = remap_tree.query(mesh.vertices)
    tri = owner[mesh.triangles]
    ok = (tri[:, 0] != tri[:, 1]) & (tri[:, 1] != tri[:, 2]) & (tri[:, 0] != tri[:, 2])
    dec = Mesh(mesh.vertices[keep], tri[ok],
               part_labels=mesh.part_labels[keep])
    return dec, keep.astype(np.int64)
