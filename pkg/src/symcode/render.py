"""Software rasterizer for ground-truth label maps.

Renders visible/amodal masks, per-pixel surface code maps and depth with a
plain z-buffer. Pixel centers sit at (u + 0.5, v + 0.5); ties on shared
triangle edges are resolved by a top-left fill rule so adjacent triangles
never double-own or drop a pixel. Codes are categorical: a pixel takes the
code of the nearest of the winning triangle's three vertices, never an
interpolated value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoding import SurfaceEncoding, code_bit
from .errors import BehindCamera, ParseError, ShapeMismatch
from .geometry import CameraIntrinsics, Pose
from .mesh import Mesh

NEAR_PLANE = 1e-6
CODE_BACKGROUND = -1
RAW_BACKGROUND = 0xFFFFFFFF
# how pixels pick a vertex: largest screen-space barycentric coordinate of
# the winning triangle; recorded in code map files so downstream consumers
# can tell which rule produced the labels
ATTRIBUTION = "screen_barycentric"


def project(K: CameraIntrinsics, T: Pose, point) -> np.ndarray:
    """Pinhole projection of one model-space point to pixel coordinates."""
    p = T.apply(np.asarray(point, dtype=float).reshape(3))
    if p[2] <= 0:
        raise BehindCamera(f"point projects behind the camera (z = {p[2]:.6g})")
    return np.array([K.fx * p[0] / p[2] + K.cx, K.fy * p[1] / p[2] + K.cy])


def project_points(K: CameraIntrinsics, points_cam: np.ndarray) -> np.ndarray:
    """Project camera-frame points; caller guarantees positive depth."""
    p = np.asarray(points_cam, dtype=float).reshape(-1, 3)
    z = p[:, 2]
    return np.column_stack([K.fx * p[:, 0] / z + K.cx,
                            K.fy * p[:, 1] / z + K.cy])


@dataclass(frozen=True)
class RenderGeometry:
    """Pose-dependent but encoding-independent render products.

    vertex_ids holds, per pixel, the mesh vertex whose code the pixel takes
    (-1 for background); depth is camera-frame z with 0 for background.
    """

    vertex_ids: np.ndarray
    depth: np.ndarray
    mask: np.ndarray

    @property
    def shape(self):
        return self.depth.shape


@dataclass(frozen=True)
class LabelMaps:
    """Ground-truth maps for one view.

    visible is amodal minus scene occlusion; code_map carries -1 background
    and is populated exactly on visible pixels; depth is camera z on visible
    pixels and 0 elsewhere.
    """

    visible: np.ndarray
    amodal: np.ndarray
    code_map: np.ndarray
    depth: np.ndarray
    d: int

    def __post_init__(self):
        if np.any(self.visible & ~self.amodal):
            raise ValueError("visible mask exceeds amodal mask")
        if np.any((self.code_map >= 0) != self.visible):
            raise ValueError("code map must cover exactly the visible pixels")
        if np.any((self.depth > 0) != self.visible):
            raise ValueError("depth must be positive exactly on visible pixels")


def _clip_triangle(corners: np.ndarray, znear: float):
    """Sutherland-Hodgman clip of one camera-space triangle against z=znear.

    Returns a list of triangles (each (3, 3) camera-space)."""
    inside = corners[:, 2] >= znear
    if inside.all():
        return [corners]
    if not inside.any():
        return []
    poly = []
    for i in range(3):
        a, b = corners[i], corners[(i + 1) % 3]
        ain, bin_ = inside[i], inside[(i + 1) % 3]
        if ain:
            poly.append(a)
        if ain != bin_:
            t = (znear - a[2]) / (b[2] - a[2])
            poly.append(a + t * (b - a))
    tris = []
    for k in range(1, len(poly) - 1):
        tris.append(np.array([poly[0], poly[k], poly[k + 1]]))
    return tris


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _top_left(ax, ay, bx, by) -> bool:
    dy = by - ay
    dx = bx - ax
    return (dy == 0 and dx > 0) or dy < 0


def render_geometry(mesh: Mesh, K: CameraIntrinsics, T: Pose,
                    occluders=()) -> tuple:
    """Rasterize a mesh and its occluders.

    Returns (amodal RenderGeometry, occluder depth buffer). The amodal pass
    ignores occluders entirely; the occluder buffer holds the nearest
    occluder depth per pixel (inf where none).
    """
    own = _rasterize_mesh(mesh, K, T)
    occ = np.full((K.height, K.width), np.inf)
    for omesh, opose in occluders:
        og = _rasterize_mesh(omesh, K, opose)
        odepth = np.where(og.mask, og.depth, np.inf)
        occ = np.minimum(occ, odepth)
    return own, occ


def _rasterize_mesh(mesh: Mesh, K: CameraIntrinsics, T: Pose) -> RenderGeometry:
    H, W = K.height, K.width
    zbuf = np.full((H, W), np.inf)
    vid = np.full((H, W), -1, dtype=np.int64)

    cam = T.apply(mesh.vertices)
    tris = mesh.triangles
    for ti in range(tris.shape[0]):
        orig_ids = tris[ti]
        for corners in _clip_triangle(cam[orig_ids], NEAR_PLANE):
            _raster_triangle(K, corners, cam[orig_ids], orig_ids, zbuf, vid)

    mask = vid >= 0
    depth = np.where(mask, zbuf, 0.0)
    return RenderGeometry(vertex_ids=vid, depth=depth, mask=mask)


def _raster_triangle(K, corners, orig_cam, orig_ids, zbuf, vid):
    scr = project_points(K, corners)
    z = corners[:, 2]

    x0, y0 = scr[0]
    x1, y1 = scr[1]
    x2, y2 = scr[2]
    area = _edge(x0, y0, x1, y1, x2, y2)
    if area == 0:
        return
    if area < 0:
        # flip winding so the interior is on the positive side of each edge
        x1, y1, x2, y2 = x2, y2, x1, y1
        corners = corners[[0, 2, 1]]
        z = z[[0, 2, 1]]
        area = -area

    H, W = zbuf.shape
    xmin = max(int(np.floor(min(x0, x1, x2) - 0.5)), 0)
    xmax = min(int(np.ceil(max(x0, x1, x2) - 0.5)), W - 1)
    ymin = max(int(np.floor(min(y0, y1, y2) - 0.5)), 0)
    ymax = min(int(np.ceil(max(y0, y1, y2) - 0.5)), H - 1)
    if xmin > xmax or ymin > ymax:
        return

    px = np.arange(xmin, xmax + 1) + 0.5
    py = np.arange(ymin, ymax + 1) + 0.5
    PX, PY = np.meshgrid(px, py)

    w0 = _edge(x1, y1, x2, y2, PX, PY)
    w1 = _edge(x2, y2, x0, y0, PX, PY)
    w2 = _edge(x0, y0, x1, y1, PX, PY)
    accept = np.ones(PX.shape, dtype=bool)
    for w, (ax, ay, bx, by) in ((w0, (x1, y1, x2, y2)),
                                (w1, (x2, y2, x0, y0)),
                                (w2, (x0, y0, x1, y1))):
        if _top_left(ax, ay, bx, by):
            accept &= w >= 0
        else:
            accept &= w > 0
    if not accept.any():
        return

    l0 = w0 / area
    l1 = w1 / area
    l2 = w2 / area
    invz = l0 / z[0] + l1 / z[1] + l2 / z[2]
    depth = np.where(invz > 0, 1.0 / np.where(invz > 0, invz, 1.0), np.inf)

    sub = zbuf[ymin:ymax + 1, xmin:xmax + 1]
    win = accept & (depth < sub)
    if not win.any():
        return

    nearest = _attribute_vertices(K, orig_cam, orig_ids, corners, z,
                                  l0, l1, l2, invz, PX, PY, win)

    sub[win] = depth[win]
    vid[ymin:ymax + 1, xmin:xmax + 1][win] = nearest


def _attribute_vertices(K, orig_cam, orig_ids, corners, z,
                        l0, l1, l2, invz, PX, PY, win):
    """Nearest-vertex attribute per winning pixel.

    The vertex with the largest screen-space barycentric coordinate of the
    original triangle claims the pixel. When the original triangle crosses
    the near plane (no stable projection) the nearest original vertex to the
    perspective-correct surface point is used instead.
    """
    orig_ids = np.asarray(orig_ids)
    if np.all(orig_cam[:, 2] > NEAR_PLANE):
        oscr = project_points(K, orig_cam)
        oarea = _edge(oscr[0, 0], oscr[0, 1], oscr[1, 0], oscr[1, 1],
                      oscr[2, 0], oscr[2, 1])
        if oarea != 0:
            ow0 = _edge(oscr[1, 0], oscr[1, 1], oscr[2, 0], oscr[2, 1],
                        PX[win], PY[win])
            ow1 = _edge(oscr[2, 0], oscr[2, 1], oscr[0, 0], oscr[0, 1],
                        PX[win], PY[win])
            ow2 = _edge(oscr[0, 0], oscr[0, 1], oscr[1, 0], oscr[1, 1],
                        PX[win], PY[win])
            lam = np.stack([ow0, ow1, ow2], axis=1) / oarea
            return orig_ids[np.argmax(lam, axis=1)]
    num = (l0[win, None] * corners[0] / z[0]
           + l1[win, None] * corners[1] / z[1]
           + l2[win, None] * corners[2] / z[2])
    surf = num / invz[win, None]
    d2 = ((surf[:, None, :] - orig_cam[None, :, :]) ** 2).sum(axis=2)
    return orig_ids[np.argmin(d2, axis=1)]


def render_labels(mesh: Mesh, encoding: SurfaceEncoding, K: CameraIntrinsics,
                  T: Pose, occluders=()) -> LabelMaps:
    """Visible/amodal masks, code map, and depth for one pose."""
    geom, occ = render_geometry(mesh, K, T, occluders)
    return labels_from_geometry(geom, occ, encoding)


def labels_from_geometry(geom: RenderGeometry, occ_depth: np.ndarray,
                         encoding: SurfaceEncoding) -> LabelMaps:
    """Attach an encoding to an already-rasterized view."""
    amodal = geom.mask
    visible = amodal & (geom.depth <= occ_depth)
    codes = np.full(geom.shape, CODE_BACKGROUND, dtype=np.int64)
    vis_ids = geom.vertex_ids[visible]
    codes[visible] = encoding.vertex_codes.astype(np.int64)[vis_ids]
    depth = np.where(visible, geom.depth, 0.0)
    return LabelMaps(visible=visible, amodal=amodal, code_map=codes,
                     depth=depth, d=encoding.d)


def render_depth(mesh: Mesh, K: CameraIntrinsics, T: Pose) -> np.ndarray:
    """Object-only depth map; 0 marks background."""
    geom = _rasterize_mesh(mesh, K, T)
    return geom.depth


def extract_bit_map(maps: LabelMaps, bit: int) -> np.ndarray:
    """Per-pixel bit of the code map; -1 marks background.

    Bit 0 is the first split (most significant), matching the prefix
    structure of the encoding tree.
    """
    out = np.full(maps.code_map.shape, -1, dtype=np.int8)
    vis = maps.code_map >= 0
    out[vis] = code_bit(maps.code_map[vis], bit, maps.d)
    return out


# ---------------------------------------------------------------------------
# file formats

def write_mask_pgm(mask: np.ndarray, path) -> None:
    """Binary mask as P5 PGM, foreground 255."""
    arr = np.where(np.asarray(mask, bool), 255, 0).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(arr.tobytes())


def read_mask_pgm(path) -> np.ndarray:
    arr, maxval = _read_pgm(path)
    return arr > (maxval // 2)


def _read_pgm(path):
    raw = Path(path).read_bytes()
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(raw):
        # header tokens may be separated by any whitespace or comments
        if raw[i:i + 1] == b"#":
            i = raw.find(b"\n", i)
            if i < 0:
                raise ParseError(f"{path}: truncated PGM header")
            continue
        if raw[i:i + 1].isspace():
            i += 1
            continue
        j = i
        while j < len(raw) and not raw[j:j + 1].isspace():
            j += 1
        tokens.append(raw[i:j])
        i = j
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise ParseError(f"{path}: not a P5 PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = raw[i + 1:]
    if maxval < 256:
        arr = np.frombuffer(data[:w * h], dtype=np.uint8)
    else:
        arr = np.frombuffer(data[:2 * w * h], dtype=">u2")
    if arr.size != w * h:
        raise ParseError(f"{path}: PGM pixel data truncated")
    return arr.reshape(h, w).astype(np.int64), maxval


def write_code_map(maps_or_codes, path, d: int = None) -> None:
    """Code map to file.

    d <= 15: 16-bit P5 PGM (big-endian samples per the format), background
    stored as 65535. Larger d: raw 32-bit little-endian values with a JSON
    sidecar `<path>.json`, background 0xFFFFFFFF.
    """
    if isinstance(maps_or_codes, LabelMaps):
        codes, d = maps_or_codes.code_map, maps_or_codes.d
    else:
        codes = np.asarray(maps_or_codes)
        if d is None:
            raise ValueError("d is required when passing a raw code array")
    h, w = codes.shape
    if d <= 15:
        arr = np.where(codes < 0, 65535, codes).astype(">u2")
        with open(path, "wb") as fh:
            fh.write(f"P5\n# attribution {ATTRIBUTION}\n{w} {h}\n65535\n"
                     .encode())
            fh.write(arr.tobytes())
    else:
        arr = np.where(codes < 0, RAW_BACKGROUND, codes).astype("<u4")
        Path(path).write_bytes(arr.tobytes())
        Path(str(path) + ".json").write_text(json.dumps(
            {"width": w, "height": h, "d": int(d), "dtype": "<u4",
             "background": RAW_BACKGROUND, "attribution": ATTRIBUTION}))


def read_code_map(path, d: int = None) -> np.ndarray:
    """Inverse of write_code_map; returns int64 with -1 background."""
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        w, h = int(meta["width"]), int(meta["height"])
        arr = np.frombuffer(Path(path).read_bytes(), dtype="<u4")
        if arr.size != w * h:
            raise ParseError(f"{path}: raw code map truncated")
        codes = arr.reshape(h, w).astype(np.int64)
        codes[codes == int(meta["background"])] = CODE_BACKGROUND
        return codes
    arr, maxval = _read_pgm(path)
    if maxval != 65535:
        raise ParseError(f"{path}: code map PGM must have maxval 65535")
    codes = arr.astype(np.int64)
    codes[codes == 65535] = CODE_BACKGROUND
    return codes


def write_depth_raw(depth: np.ndarray, path) -> None:
    """Depth as a one-line JSON shape header plus float32 little-endian."""
    arr = np.ascontiguousarray(np.asarray(depth, dtype="<f4"))
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(json.dumps({"width": w, "height": h, "dtype": "<f4"}).encode())
        fh.write(b"\n")
        fh.write(arr.tobytes())


def read_depth_raw(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ParseError(f"{path}: missing depth header")
    try:
        meta = json.loads(raw[:nl].decode())
        w, h = int(meta["width"]), int(meta["height"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
        raise ParseError(f"{path}: bad depth header: {exc}") from exc
    payload = raw[nl + 1:]
    if len(payload) != 4 * w * h:
        raise ShapeMismatch(f"{path}: depth payload does not match header")
    arr = np.frombuffer(payload, dtype="<f4")
    return arr.reshape(h, w).astype(np.float64)
