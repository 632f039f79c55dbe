// Software renderer for the preview mesh. Canvas 2D has no depth buffer,
// so triangles are rasterized here with a z-buffer; that same buffer
// answers which vertices are visible, which is what brush selection needs
// (a lasso over one cube face must not grab the hidden face behind it).

export interface OrbitCamera {
  yaw: number;
  pitch: number;
  distance: number;
  target: [number, number, number];
  fov: number;
}

export const NEAR_PLANE = 1e-3;
const PITCH_LIMIT = Math.PI / 2 - 1e-3;

export function clampPitch(pitch: number): number {
  return Math.min(PITCH_LIMIT, Math.max(-PITCH_LIMIT, pitch));
}

export function cameraEye(cam: OrbitCamera): [number, number, number] {
  const cp = Math.cos(cam.pitch);
  return [
    cam.target[0] + cam.distance * cp * Math.sin(cam.yaw),
    cam.target[1] + cam.distance * Math.sin(cam.pitch),
    cam.target[2] + cam.distance * cp * Math.cos(cam.yaw),
  ];
}

function normalize(v: [number, number, number]): [number, number, number] {
  const n = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
}

function cross(a: [number, number, number], b: [number, number, number]): [number, number, number] {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

// screen x, y and view-space depth per vertex; NaN x marks points at or
// behind the near plane
export function projectVertices(
  positions: Float64Array,
  cam: OrbitCamera,
  width: number,
  height: number,
): Float32Array {
  const eye = cameraEye(cam);
  const fwd = normalize([
    cam.target[0] - eye[0],
    cam.target[1] - eye[1],
    cam.target[2] - eye[2],
  ]);
  const right = normalize(cross(fwd, [0, 1, 0]));
  const up = cross(right, fwd);
  const f = height / 2 / Math.tan(cam.fov / 2);
  const n = positions.length / 3;
  const out = new Float32Array(n * 3);
  for (let i = 0; i < n; i++) {
    const px = positions[3 * i] - eye[0];
    const py = positions[3 * i + 1] - eye[1];
    const pz = positions[3 * i + 2] - eye[2];
    const z = px * fwd[0] + py * fwd[1] + pz * fwd[2];
    if (z <= NEAR_PLANE) {
      out[3 * i] = NaN;
      out[3 * i + 1] = NaN;
      out[3 * i + 2] = z;
      continue;
    }
    const x = px * right[0] + py * right[1] + pz * right[2];
    const y = px * up[0] + py * up[1] + pz * up[2];
    out[3 * i] = width / 2 + (f * x) / z;
    out[3 * i + 1] = height / 2 - (f * y) / z;
    out[3 * i + 2] = z;
  }
  return out;
}

export function computeVertexNormals(positions: Float64Array, triangles: Int32Array): Float64Array {
  const normals = new Float64Array(positions.length);
  for (let t = 0; t < triangles.length; t += 3) {
    const a = triangles[t] * 3;
    const b = triangles[t + 1] * 3;
    const c = triangles[t + 2] * 3;
    const ux = positions[b] - positions[a];
    const uy = positions[b + 1] - positions[a + 1];
    const uz = positions[b + 2] - positions[a + 2];
    const vx = positions[c] - positions[a];
    const vy = positions[c + 1] - positions[a + 1];
    const vz = positions[c + 2] - positions[a + 2];
    const nx = uy * vz - uz * vy;
    const ny = uz * vx - ux * vz;
    const nz = ux * vy - uy * vx;
    for (const o of [a, b, c]) {
      normals[o] += nx;
      normals[o + 1] += ny;
      normals[o + 2] += nz;
    }
  }
  for (let i = 0; i < normals.length; i += 3) {
    const n = Math.hypot(normals[i], normals[i + 1], normals[i + 2]) || 1;
    normals[i] /= n;
    normals[i + 1] /= n;
    normals[i + 2] /= n;
  }
  return normals;
}

export class MeshRaster {
  width: number;
  height: number;
  zbuf: Float32Array;
  // RGBA, paintable straight into an ImageData
  pixels: Uint8ClampedArray;
  projected: Float32Array = new Float32Array(0);

  constructor(width: number, height: number) {
    this.width = width;
    this.height = height;
    this.zbuf = new Float32Array(width * height);
    this.pixels = new Uint8ClampedArray(width * height * 4);
  }

  clear(): void {
    this.zbuf.fill(Infinity);
    this.pixels.fill(0);
    for (let i = 3; i < this.pixels.length; i += 4) this.pixels[i] = 255;
  }

  // colors: RGB per vertex, length 3n, 0..255
  render(
    positions: Float64Array,
    triangles: Int32Array,
    colors: Float32Array,
    cam: OrbitCamera,
  ): void {
    this.clear();
    const proj = projectVertices(positions, cam, this.width, this.height);
    this.projected = proj;
    const w = this.width;
    const h = this.height;
    for (let t = 0; t < triangles.length; t += 3) {
      const ia = triangles[t];
      const ib = triangles[t + 1];
      const ic = triangles[t + 2];
      const ax = proj[3 * ia], ay = proj[3 * ia + 1], az = proj[3 * ia + 2];
      const bx = proj[3 * ib], by = proj[3 * ib + 1], bz = proj[3 * ib + 2];
      const cx = proj[3 * ic], cy = proj[3 * ic + 1], cz = proj[3 * ic + 2];
      if (Number.isNaN(ax) || Number.isNaN(bx) || Number.isNaN(cx)) continue;
      const area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
      if (Math.abs(area) < 1e-12) continue;
      const minX = Math.max(0, Math.floor(Math.min(ax, bx, cx)));
      const maxX = Math.min(w - 1, Math.ceil(Math.max(ax, bx, cx)));
      const minY = Math.max(0, Math.floor(Math.min(ay, by, cy)));
      const maxY = Math.min(h - 1, Math.ceil(Math.max(ay, by, cy)));
      if (minX > maxX || minY > maxY) continue;
      for (let y = minY; y <= maxY; y++) {
        for (let x = minX; x <= maxX; x++) {
          const px = x + 0.5;
          const py = y + 0.5;
          const wa = ((bx - px) * (cy - py) - (by - py) * (cx - px)) / area;
          const wb = ((cx - px) * (ay - py) - (cy - py) * (ax - px)) / area;
          const wc = 1 - wa - wb;
          if (wa < 0 || wb < 0 || wc < 0) continue;
          const z = wa * az + wb * bz + wc * cz;
          const o = y * w + x;
          if (z >= this.zbuf[o]) continue;
          this.zbuf[o] = z;
          const p = o * 4;
          this.pixels[p] = wa * colors[3 * ia] + wb * colors[3 * ib] + wc * colors[3 * ic];
          this.pixels[p + 1] = wa * colors[3 * ia + 1] + wb * colors[3 * ib + 1] + wc * colors[3 * ic + 1];
          this.pixels[p + 2] = wa * colors[3 * ia + 2] + wb * colors[3 * ib + 2] + wc * colors[3 * ic + 2];
          this.pixels[p + 3] = 255;
        }
      }
    }
  }

  // a vertex is visible when some pixel next to its projection carries a
  // depth at least as close as the vertex itself
  visibleVertices(): Uint8Array {
    const proj = this.projected;
    const n = proj.length / 3;
    const out = new Uint8Array(n);
    const w = this.width;
    const h = this.height;
    for (let i = 0; i < n; i++) {
      const sx = proj[3 * i];
      const sy = proj[3 * i + 1];
      const z = proj[3 * i + 2];
      if (Number.isNaN(sx)) continue;
      const cx = Math.round(sx - 0.5);
      const cy = Math.round(sy - 0.5);
      const tol = 1e-3 * z + 1e-6;
      for (let dy = -1; dy <= 1 && !out[i]; dy++) {
        for (let dx = -1; dx <= 1; dx++) {
          const x = cx + dx;
          const y = cy + dy;
          if (x < 0 || y < 0 || x >= w || y >= h) continue;
          if (z <= this.zbuf[y * w + x] + tol) {
            out[i] = 1;
            break;
          }
        }
      }
    }
    return out;
  }
}

export function pointInPolygon(x: number, y: number, polygon: number[][]): boolean {
  let inside = false;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    const xi = polygon[i][0], yi = polygon[i][1];
    const xj = polygon[j][0], yj = polygon[j][1];
    if (yi > y !== yj > y && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

export function verticesInLasso(
  projected: Float32Array,
  visible: Uint8Array,
  polygon: number[][],
): number[] {
  if (polygon.length < 3) return [];
  const out: number[] = [];
  for (let i = 0; i < visible.length; i++) {
    if (!visible[i]) continue;
    const x = projected[3 * i];
    if (Number.isNaN(x)) continue;
    if (pointInPolygon(x, projected[3 * i + 1], polygon)) out.push(i);
  }
  return out;
}

export function verticesInSphere(
  projected: Float32Array,
  visible: Uint8Array,
  cx: number,
  cy: number,
  radius: number,
): number[] {
  const out: number[] = [];
  const r2 = radius * radius;
  for (let i = 0; i < visible.length; i++) {
    if (!visible[i]) continue;
    const dx = projected[3 * i] - cx;
    const dy = projected[3 * i + 1] - cy;
    if (Number.isNaN(dx)) continue;
    if (dx * dx + dy * dy <= r2) out.push(i);
  }
  return out;
}

// brush results are preview-space; mutations go to the server in full-mesh
// indices
export function toFullIndices(previewIndices: number[], mapping: number[]): number[] {
  return previewIndices.map((i) => mapping[i]);
}
