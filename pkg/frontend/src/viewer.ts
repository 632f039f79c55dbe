// Canvas viewer: orbit camera, software raster, and brush interaction.
// Left drag orbits; wheel zooms; with a tool armed, left drag lassoes or
// sweeps a sphere brush instead and the selection lands in a callback.

import {
  MeshRaster,
  OrbitCamera,
  cameraEye,
  clampPitch,
  computeVertexNormals,
  verticesInLasso,
  verticesInSphere,
} from "./raster.js";

export type BrushTool = "orbit" | "lasso" | "sphere";

const ORBIT_SPEED = 0.008;
const ZOOM_STEP = 1.12;
const DEFAULT_FOV = (45 * Math.PI) / 180;

export class MeshViewer {
  canvas: HTMLCanvasElement;
  ctx: CanvasRenderingContext2D;
  raster: MeshRaster;
  camera: OrbitCamera;
  positions: Float64Array = new Float64Array(0);
  triangles: Int32Array = new Int32Array(0);
  normals: Float64Array = new Float64Array(0);
  colors: Float32Array = new Float32Array(0);
  tool: BrushTool = "orbit";
  brushRadius = 20;
  onSelect: ((previewIndices: number[], additive: boolean) => void) | null = null;
  private dragging = false;
  private lassoPath: number[][] = [];
  private lastX = 0;
  private lastY = 0;
  private sphereSwept: Set<number> = new Set();
  private additive = false;

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
    this.raster = new MeshRaster(canvas.width, canvas.height);
    this.camera = {
      yaw: 0.6,
      pitch: 0.4,
      distance: 10,
      target: [0, 0, 0],
      fov: DEFAULT_FOV,
    };
    canvas.addEventListener("mousedown", (e) => this.onDown(e));
    canvas.addEventListener("mousemove", (e) => this.onMove(e));
    window.addEventListener("mouseup", () => this.onUp());
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      const k = e.deltaY > 0 ? ZOOM_STEP : 1 / ZOOM_STEP;
      this.camera.distance *= k;
      this.draw();
    });
  }

  setMesh(vertices: number[][], triangles: number[][]): void {
    const n = vertices.length;
    this.positions = new Float64Array(n * 3);
    const lo = [Infinity, Infinity, Infinity];
    const hi = [-Infinity, -Infinity, -Infinity];
    for (let i = 0; i < n; i++) {
      for (let k = 0; k < 3; k++) {
        const v = vertices[i][k];
        this.positions[3 * i + k] = v;
        if (v < lo[k]) lo[k] = v;
        if (v > hi[k]) hi[k] = v;
      }
    }
    this.triangles = new Int32Array(triangles.length * 3);
    for (let t = 0; t < triangles.length; t++) {
      this.triangles[3 * t] = triangles[t][0];
      this.triangles[3 * t + 1] = triangles[t][1];
      this.triangles[3 * t + 2] = triangles[t][2];
    }
    this.normals = computeVertexNormals(this.positions, this.triangles);
    this.camera.target = [
      (lo[0] + hi[0]) / 2,
      (lo[1] + hi[1]) / 2,
      (lo[2] + hi[2]) / 2,
    ];
    const span = Math.hypot(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]) || 1;
    this.camera.distance = span * 1.6;
    this.colors = new Float32Array(n * 3).fill(180);
  }

  eye(): [number, number, number] {
    return cameraEye(this.camera);
  }

  setColors(colors: Float32Array): void {
    this.colors = colors;
  }

  draw(): void {
    if (this.positions.length === 0) return;
    this.raster.render(this.positions, this.triangles, this.colors, this.camera);
    const img = new ImageData(
      new Uint8ClampedArray(this.raster.pixels),
      this.raster.width,
      this.raster.height,
    );
    this.ctx.putImageData(img, 0, 0);
    if (this.dragging && this.tool === "lasso" && this.lassoPath.length > 1) {
      this.ctx.strokeStyle = "#ff7828";
      this.ctx.lineWidth = 1.5;
      this.ctx.beginPath();
      this.ctx.moveTo(this.lassoPath[0][0], this.lassoPath[0][1]);
      for (const p of this.lassoPath) this.ctx.lineTo(p[0], p[1]);
      this.ctx.stroke();
    }
    if (this.tool === "sphere") {
      this.ctx.strokeStyle = "#ff7828";
      this.ctx.lineWidth = 1;
      this.ctx.beginPath();
      this.ctx.arc(this.lastX, this.lastY, this.brushRadius, 0, 2 * Math.PI);
      this.ctx.stroke();
    }
  }

  private canvasPos(e: MouseEvent): [number, number] {
    const r = this.canvas.getBoundingClientRect();
    return [
      ((e.clientX - r.left) * this.canvas.width) / r.width,
      ((e.clientY - r.top) * this.canvas.height) / r.height,
    ];
  }

  private onDown(e: MouseEvent): void {
    const [x, y] = this.canvasPos(e);
    this.dragging = true;
    this.additive = e.shiftKey;
    this.lastX = x;
    this.lastY = y;
    if (this.tool === "lasso") {
      this.lassoPath = [[x, y]];
    } else if (this.tool === "sphere") {
      this.sphereSwept = new Set(
        verticesInSphere(this.raster.projected, this.raster.visibleVertices(), x, y, this.brushRadius),
      );
    }
  }

  private onMove(e: MouseEvent): void {
    const [x, y] = this.canvasPos(e);
    if (!this.dragging) {
      this.lastX = x;
      this.lastY = y;
      if (this.tool === "sphere") this.draw();
      return;
    }
    if (this.tool === "orbit") {
      this.camera.yaw -= (x - this.lastX) * ORBIT_SPEED;
      this.camera.pitch = clampPitch(this.camera.pitch + (y - this.lastY) * ORBIT_SPEED);
      this.lastX = x;
      this.lastY = y;
      this.draw();
      return;
    }
    this.lastX = x;
    this.lastY = y;
    if (this.tool === "lasso") {
      this.lassoPath.push([x, y]);
      this.draw();
    } else {
      for (const i of verticesInSphere(
        this.raster.projected,
        this.raster.visibleVertices(),
        x,
        y,
        this.brushRadius,
      )) {
        this.sphereSwept.add(i);
      }
      this.draw();
    }
  }

  private onUp(): void {
    if (!this.dragging) return;
    this.dragging = false;
    if (this.tool === "lasso") {
      const picked = verticesInLasso(
        this.raster.projected,
        this.raster.visibleVertices(),
        this.lassoPath,
      );
      this.lassoPath = [];
      this.onSelect?.(picked, this.additive);
    } else if (this.tool === "sphere") {
      const picked = [...this.sphereSwept];
      this.sphereSwept = new Set();
      this.onSelect?.(picked, this.additive);
    }
  }
}
