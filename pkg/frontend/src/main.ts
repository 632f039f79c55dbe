import { AnnotationApi, ApiError, ClassifyResult, EncodePreviewResult } from "./api.js";
import { buildShade, buildVertexColors, ColorSources } from "./coloring.js";
import { validateBitIndex, validateBits } from "./palette.js";
import { debounce, DocumentStore, initialViewState, SymmetrySpecInput, DisplayMode } from "./state.js";
import { BrushTool, MeshViewer } from "./viewer.js";

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

const api = new AnnotationApi("");
const store = new DocumentStore(api);
const view = initialViewState();
const viewer = new MeshViewer(el<HTMLCanvasElement>("view"));

let classification: ClassifyResult | null = null;
let preview: EncodePreviewResult | null = null;

const statusBox = el<HTMLDivElement>("status");

function status(text: string, isError = false): void {
  statusBox.textContent = text;
  statusBox.className = isError ? "error" : "";
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    const d = err.detail as { message?: string } | string | null;
    if (typeof d === "string") return d;
    if (d && typeof d === "object" && d.message) return d.message;
    return `request failed (${err.status})`;
  }
  return String(err);
}

function redraw(): void {
  const sources: ColorSources = {
    partLabels: store.partLabels,
    mapping: store.mapping,
    kinds: classification ? classification.kinds : null,
    codes: preview ? preview.codes : null,
    d: preview ? preview.d : view.d,
  };
  const shade = viewer.normals.length
    ? buildShade(viewer.normals, viewer.positions, viewer.eye())
    : null;
  viewer.setColors(
    buildVertexColors(view.mode, view.bitIndex, sources, view.selection, shade),
  );
  viewer.draw();
  el<HTMLDivElement>("selection-info").textContent = `${view.selection.size} selected`;
}

// --- view controls ---------------------------------------------------

el<HTMLSelectElement>("mode").addEventListener("change", (e) => {
  view.mode = (e.target as HTMLSelectElement).value as DisplayMode;
  redraw();
});

el<HTMLInputElement>("bit-index").addEventListener("change", (e) => {
  const k = Number((e.target as HTMLInputElement).value);
  const d = preview ? preview.d : view.d;
  const problem = validateBitIndex(k, d);
  if (problem) {
    status(problem, true);
    return;
  }
  view.bitIndex = k;
  redraw();
});

el<HTMLInputElement>("bits").addEventListener("change", (e) => {
  view.d = Number((e.target as HTMLInputElement).value);
});

el<HTMLInputElement>("seed").addEventListener("change", (e) => {
  view.seed = Number((e.target as HTMLInputElement).value);
});

el<HTMLButtonElement>("preview-codes").addEventListener("click", async () => {
  const problem = validateBits(view.d);
  if (problem) {
    status(problem, true);
    return;
  }
  status("encoding...");
  try {
    preview = await api.encodePreview(view.d, view.seed);
    status(
      `codes ready: ${preview.group_count} groups, hash ${preview.content_hash.slice(0, 12)}`,
    );
    if (view.mode === "parts" || view.mode === "classification") {
      view.mode = "code-preview";
      el<HTMLSelectElement>("mode").value = "code-preview";
    }
    redraw();
  } catch (err) {
    status(describeError(err), true);
  }
});

// --- selection tools -------------------------------------------------

const toolButtons: Record<BrushTool, HTMLButtonElement> = {
  orbit: el("tool-orbit"),
  lasso: el("tool-lasso"),
  sphere: el("tool-sphere"),
};

for (const [tool, btn] of Object.entries(toolButtons) as [BrushTool, HTMLButtonElement][]) {
  btn.addEventListener("click", () => {
    viewer.tool = tool;
    for (const b of Object.values(toolButtons)) b.classList.remove("active");
    btn.classList.add("active");
  });
}

el<HTMLInputElement>("brush-radius").addEventListener("input", (e) => {
  viewer.brushRadius = Number((e.target as HTMLInputElement).value);
});

viewer.onSelect = (indices, additive) => {
  if (!additive) view.selection.clear();
  for (const i of indices) view.selection.add(i);
  redraw();
};

el<HTMLButtonElement>("clear-selection").addEventListener("click", () => {
  view.selection.clear();
  redraw();
});

// --- symmetry assignment ---------------------------------------------

function axisInput(): number[] {
  return [
    Number(el<HTMLInputElement>("axis-x").value),
    Number(el<HTMLInputElement>("axis-y").value),
    Number(el<HTMLInputElement>("axis-z").value),
  ];
}

function offsetInput(): number[] {
  return [
    Number(el<HTMLInputElement>("off-x").value),
    Number(el<HTMLInputElement>("off-y").value),
    Number(el<HTMLInputElement>("off-z").value),
  ];
}

// row-major 4x4 rotation by `angle` about the axis through `offset`
function discreteMatrix(axis: number[], offset: number[], angleDeg: number): number[] {
  const n = Math.hypot(axis[0], axis[1], axis[2]) || 1;
  const [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
  const a = (angleDeg * Math.PI) / 180;
  const c = Math.cos(a);
  const s = Math.sin(a);
  const C = 1 - c;
  const R = [
    c + x * x * C, x * y * C - z * s, x * z * C + y * s,
    y * x * C + z * s, c + y * y * C, y * z * C - x * s,
    z * x * C - y * s, z * y * C + x * s, c + z * z * C,
  ];
  const t = [0, 1, 2].map(
    (i) => offset[i] - (R[3 * i] * offset[0] + R[3 * i + 1] * offset[1] + R[3 * i + 2] * offset[2]),
  );
  return [
    R[0], R[1], R[2], t[0],
    R[3], R[4], R[5], t[1],
    R[6], R[7], R[8], t[2],
    0, 0, 0, 1,
  ];
}

function specFromForm(): SymmetrySpecInput {
  const kind = el<HTMLSelectElement>("spec-kind").value;
  const axis = axisInput();
  const offset = offsetInput();
  if (kind === "continuous") return { kind, axis, offset };
  if (kind === "nfold") {
    return { kind, axis, offset, n: Number(el<HTMLInputElement>("nfold-n").value) };
  }
  const angle = Number(el<HTMLInputElement>("disc-angle").value);
  return { kind: "discrete", matrix: discreteMatrix(axis, offset, angle) };
}

el<HTMLButtonElement>("assign").addEventListener("click", async () => {
  if (view.selection.size === 0) {
    status("select some vertices first", true);
    return;
  }
  const partId = Number(el<HTMLInputElement>("part-id").value);
  try {
    await store.assignSymmetry([...view.selection], specFromForm(), partId);
    classification = null;
    preview = null;
    status(`part ${partId} updated (version ${store.version})`);
    redraw();
  } catch (err) {
    status(describeError(err), true);
  }
});

// --- classification --------------------------------------------------

const histogram = el<HTMLCanvasElement>("histogram");

function drawHistogram(result: ClassifyResult): void {
  const ctx = histogram.getContext("2d");
  if (!ctx) return;
  const { counts, bin_edges } = result.histogram;
  ctx.clearRect(0, 0, histogram.width, histogram.height);
  const peak = Math.max(1, ...counts);
  const bw = histogram.width / counts.length;
  ctx.fillStyle = "#4e86c8";
  counts.forEach((c, i) => {
    const bh = (c / peak) * (histogram.height - 4);
    ctx.fillRect(i * bw, histogram.height - bh, bw - 1, bh);
  });
  const lo = bin_edges[0];
  const hi = bin_edges[bin_edges.length - 1];
  if (hi > lo) {
    const tx = ((result.threshold_abs - lo) / (hi - lo)) * histogram.width;
    ctx.fillStyle = "#e0a040";
    ctx.fillRect(tx, 0, 1.5, histogram.height);
  }
}

async function runClassify(threshold: number): Promise<void> {
  try {
    classification = await api.classify(threshold);
    drawHistogram(classification);
    const counts = Object.entries(classification.counts)
      .map(([k, v]) => `${k}: ${v}`)
      .join(", ");
    el<HTMLDivElement>("class-counts").textContent = counts;
    if (view.mode === "classification") redraw();
  } catch (err) {
    status(describeError(err), true);
  }
}

const thresholdSlider = el<HTMLInputElement>("threshold");

function sliderThreshold(): number {
  return Math.pow(10, Number(thresholdSlider.value));
}

const debouncedClassify = debounce((t: number) => void runClassify(t), 300);

thresholdSlider.addEventListener("input", () => {
  const t = sliderThreshold();
  el<HTMLDivElement>("threshold-value").textContent = `${t.toExponential(2)} of diameter`;
  debouncedClassify(t);
});

// --- persistence -----------------------------------------------------

el<HTMLButtonElement>("save").addEventListener("click", async () => {
  try {
    const r = await store.save();
    el<HTMLDivElement>("save-info").textContent =
      `saved to ${r.annotation_path} (sha256 ${r.content_hash.slice(0, 16)}...)`;
    status("saved");
  } catch (err) {
    status(describeError(err), true);
  }
});

const conflictBox = el<HTMLDivElement>("conflict");

store.onConflict = () => {
  conflictBox.hidden = false;
};

el<HTMLButtonElement>("reload").addEventListener("click", async () => {
  try {
    await store.reload();
    classification = null;
    preview = null;
    conflictBox.hidden = true;
    status(`reloaded at version ${store.version}`);
    redraw();
  } catch (err) {
    status(describeError(err), true);
  }
});

// --- boot ------------------------------------------------------------

async function boot(): Promise<void> {
  status("loading mesh...");
  try {
    const mesh = await store.loadMesh();
    await store.loadAnnotation();
    viewer.setMesh(mesh.vertices, mesh.triangles);
    status(`${store.partLabels.length} preview vertices, version ${store.version}`);
    redraw();
  } catch (err) {
    status(describeError(err), true);
  }
}

void boot();
