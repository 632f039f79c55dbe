// Client-side state: the working annotation document, its version, and the
// view configuration. All geometry results displayed come from the server;
// this module only tracks what the user is looking at and editing.

import {
  AnnotationApi,
  AnnotationDoc,
  ApiError,
  SaveResult,
  SpecRef,
} from "./api.js";
import { toFullIndices } from "./raster.js";

export type DisplayMode = "parts" | "classification" | "code-preview" | "single-bit";

export const DISPLAY_MODES: DisplayMode[] = [
  "parts",
  "classification",
  "code-preview",
  "single-bit",
];

export interface ViewState {
  mode: DisplayMode;
  bitIndex: number;
  d: number;
  seed: number;
  selection: Set<number>;
}

export function initialViewState(): ViewState {
  return { mode: "parts", bitIndex: 0, d: 16, seed: 0, selection: new Set() };
}

export type SymmetrySpecInput =
  | { kind: "discrete"; matrix: number[] }
  | { kind: "continuous"; axis: number[]; offset: number[] }
  | { kind: "nfold"; axis: number[]; offset: number[]; n: number };

// append the spec to the document (reusing an identical existing entry)
// and return the reference per_part points at
export function addSpec(doc: AnnotationDoc, spec: SymmetrySpecInput): SpecRef {
  if (spec.kind === "discrete") {
    const list = (doc.symmetries_discrete ??= []);
    const key = JSON.stringify(spec.matrix);
    let idx = list.findIndex((m) => JSON.stringify(m) === key);
    if (idx < 0) idx = list.push(spec.matrix) - 1;
    return { kind: "discrete", index: idx };
  }
  if (spec.kind === "continuous") {
    const list = (doc.symmetries_continuous ??= []);
    const entry = { axis: spec.axis, offset: spec.offset };
    const key = JSON.stringify(entry);
    let idx = list.findIndex((e) => JSON.stringify(e) === key);
    if (idx < 0) idx = list.push(entry) - 1;
    return { kind: "continuous", index: idx };
  }
  const list = (doc.nfold ??= []);
  const entry = { axis: spec.axis, offset: spec.offset, n: spec.n };
  const key = JSON.stringify(entry);
  let idx = list.findIndex((e) => JSON.stringify(e) === key);
  if (idx < 0) idx = list.push(entry) - 1;
  return { kind: "nfold", index: idx };
}

// serialize mutating requests: the protocol is versioned, so firing two at
// once would guarantee a 409 for the loser
export class MutationQueue {
  private tail: Promise<unknown> = Promise.resolve();

  run<T>(fn: () => Promise<T>): Promise<T> {
    const next = this.tail.then(
      () => fn(),
      () => fn(),
    );
    this.tail = next.then(
      () => undefined,
      () => undefined,
    );
    return next;
  }
}

export class DocumentStore {
  api: AnnotationApi;
  annotation: AnnotationDoc = {};
  version = 0;
  // preview-space labels plus the preview-to-full index mapping
  partLabels: number[] = [];
  mapping: number[] = [];
  onConflict: ((serverVersion: number | null) => void) | null = null;
  private queue = new MutationQueue();

  constructor(api: AnnotationApi) {
    this.api = api;
  }

  async loadMesh(): Promise<{ vertices: number[][]; triangles: number[][] }> {
    const m = await this.api.mesh();
    this.partLabels = m.part_labels;
    this.mapping = m.mapping;
    this.version = m.version;
    return { vertices: m.vertices, triangles: m.triangles };
  }

  async loadAnnotation(): Promise<void> {
    const p = await this.api.annotation();
    this.annotation = p.annotation;
    this.version = p.version;
  }

  private transaction<T>(fn: () => Promise<T>): Promise<T> {
    return this.queue.run(async () => {
      try {
        return await fn();
      } catch (err) {
        if (err instanceof ApiError && err.isConflict) {
          this.onConflict?.(err.serverVersion);
        }
        throw err;
      }
    });
  }

  putAnnotation(doc: AnnotationDoc): Promise<number> {
    return this.transaction(async () => {
      const r = await this.api.putAnnotation(doc, this.version);
      this.annotation = doc;
      this.version = r.version;
      return r.version;
    });
  }

  save(): Promise<SaveResult> {
    return this.transaction(async () => {
      const r = await this.api.save(this.version);
      this.version = r.version;
      return r;
    });
  }

  // the assignment op: the brushed vertices become part `partId` carrying
  // `spec`; any specs the part had before are replaced (last write wins)
  assignSymmetry(
    previewIndices: number[],
    spec: SymmetrySpecInput,
    partId: number,
  ): Promise<number> {
    if (previewIndices.length === 0) {
      return Promise.reject(new Error("empty selection"));
    }
    return this.transaction(async () => {
      const full = toFullIndices(previewIndices, this.mapping);
      const r1 = await this.api.assignParts(full, partId, this.version);
      this.version = r1.version;
      const labels = this.partLabels.slice();
      for (const i of previewIndices) labels[i] = partId;
      this.partLabels = labels;

      const doc = structuredClone(this.annotation) as AnnotationDoc;
      const ref = addSpec(doc, spec);
      doc.per_part = { ...(doc.per_part ?? {}), [String(partId)]: [ref] };
      const r2 = await this.api.putAnnotation(doc, this.version);
      this.annotation = doc;
      this.version = r2.version;
      return r2.version;
    });
  }

  async reload(): Promise<void> {
    const m = await this.api.mesh();
    this.partLabels = m.part_labels;
    this.mapping = m.mapping;
    await this.loadAnnotation();
  }
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  ms: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (...args: A) => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, ms);
  };
}
