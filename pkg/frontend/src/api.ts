// Typed client for the annotation service. Every displayed result comes
// from these endpoints; the UI itself never classifies or encodes.

export interface ContinuousSpec {
  axis: number[];
  offset: number[];
}

export interface NFoldSpec {
  axis: number[];
  offset: number[];
  n: number;
}

export interface SpecRef {
  kind: string;
  index: number;
}

export interface AnnotationDoc {
  // flat row-major 4x4 motion matrices, identity implied
  symmetries_discrete?: number[][];
  symmetries_continuous?: ContinuousSpec[];
  nfold?: NFoldSpec[];
  per_part?: Record<string, (SpecRef | string)[]>;
}

export interface MeshPayload {
  vertices: number[][];
  triangles: number[][];
  // part label per preview vertex; mapping[i] is the full-mesh index
  part_labels: number[];
  mapping: number[];
  vertex_count: number;
  version: number;
}

export interface AnnotationPayload {
  annotation: AnnotationDoc;
  version: number;
}

export interface PartsResult {
  version: number;
  part_counts: Record<string, number>;
}

export interface ClassifyResult {
  // per full-mesh vertex; index through mapping for the preview
  kinds: string[];
  errors: (number | null)[];
  counts: Record<string, number>;
  threshold_abs: number;
  histogram: { bin_edges: number[]; counts: number[] };
  version: number;
}

export interface EncodePreviewResult {
  // per preview vertex
  codes: number[];
  d: number;
  seed: number;
  group_count: number;
  vertex_count: number;
  content_hash: string;
  version: number;
}

export interface SaveResult {
  content_hash: string;
  annotation_path: string;
  parts_path: string;
  version: number;
}

export class ApiError extends Error {
  status: number;
  detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.status = status;
    this.detail = detail;
  }

  get isConflict(): boolean {
    return this.status === 409;
  }

  // the version the server is actually at, reported on 409
  get serverVersion(): number | null {
    const d = this.detail as { version?: number } | null;
    return d && typeof d.version === "number" ? d.version : null;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const r = await fetch(base + path, init);
  const body = await r.json().catch(() => null);
  if (!r.ok) {
    const detail = body && typeof body === "object" && "detail" in body ? body.detail : body;
    throw new ApiError(r.status, detail);
  }
  return body as T;
}

function jsonInit(method: string, payload: unknown): RequestInit {
  return {
    method,
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  };
}

export class AnnotationApi {
  base: string;

  constructor(base = "") {
    this.base = base.replace(/\/$/, "");
  }

  health(): Promise<{ status: string; session: string }> {
    return request(this.base, "/health");
  }

  mesh(): Promise<MeshPayload> {
    return request(this.base, "/mesh");
  }

  annotation(): Promise<AnnotationPayload> {
    return request(this.base, "/annotation");
  }

  putAnnotation(annotation: AnnotationDoc, version: number): Promise<{ version: number }> {
    return request(this.base, "/annotation", jsonInit("PUT", { annotation, version }));
  }

  assignParts(vertexIndices: number[], partId: number, version: number): Promise<PartsResult> {
    return request(this.base, "/parts", jsonInit("POST", {
      vertex_indices: vertexIndices,
      part_id: partId,
      version,
    }));
  }

  classify(threshold?: number, kTest?: number): Promise<ClassifyResult> {
    const body: Record<string, number> = {};
    if (threshold !== undefined) body.threshold = threshold;
    if (kTest !== undefined) body.k_test = kTest;
    return request(this.base, "/classify", jsonInit("POST", body));
  }

  encodePreview(d: number, seed: number): Promise<EncodePreviewResult> {
    return request(this.base, "/encode-preview", jsonInit("POST", { d, seed }));
  }

  save(version: number): Promise<SaveResult> {
    return request(this.base, "/save", jsonInit("POST", { version }));
  }
}
