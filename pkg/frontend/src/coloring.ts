// Per-vertex display colors for each view mode. Pure data-in data-out so
// the mode logic is testable without a canvas.

import { bitColor, codeBit, codeColor, kindColor, partColor, Rgb } from "./palette.js";
import { DisplayMode } from "./state.js";

export interface ColorSources {
  partLabels: number[];
  mapping: number[];
  // per full-mesh vertex, from /classify
  kinds: string[] | null;
  // per preview vertex, from /encode-preview
  codes: number[] | null;
  d: number;
}

const MISSING: Rgb = { r: 70, g: 70, b: 78 };
const SELECTED: Rgb = { r: 255, g: 120, b: 40 };

export function buildVertexColors(
  mode: DisplayMode,
  bitIndex: number,
  sources: ColorSources,
  selection: Set<number>,
  shade: Float32Array | null,
): Float32Array {
  const n = sources.partLabels.length;
  const out = new Float32Array(n * 3);
  for (let i = 0; i < n; i++) {
    let c: Rgb;
    if (mode === "parts") {
      c = partColor(sources.partLabels[i]);
    } else if (mode === "classification") {
      c = sources.kinds ? kindColor(sources.kinds[sources.mapping[i]]) : MISSING;
    } else if (mode === "code-preview") {
      c = sources.codes ? codeColor(sources.codes[i]) : MISSING;
    } else {
      c = sources.codes
        ? bitColor(codeBit(sources.codes[i], bitIndex, sources.d))
        : MISSING;
    }
    if (selection.has(i)) c = SELECTED;
    const s = shade ? shade[i] : 1;
    out[3 * i] = c.r * s;
    out[3 * i + 1] = c.g * s;
    out[3 * i + 2] = c.b * s;
  }
  return out;
}

// headlight diffuse factor per vertex, display-only
export function buildShade(
  normals: Float64Array,
  positions: Float64Array,
  eye: [number, number, number],
): Float32Array {
  const n = positions.length / 3;
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    const dx = eye[0] - positions[3 * i];
    const dy = eye[1] - positions[3 * i + 1];
    const dz = eye[2] - positions[3 * i + 2];
    const len = Math.hypot(dx, dy, dz) || 1;
    const dot =
      (normals[3 * i] * dx + normals[3 * i + 1] * dy + normals[3 * i + 2] * dz) / len;
    out[i] = 0.4 + 0.6 * Math.abs(dot);
  }
  return out;
}
