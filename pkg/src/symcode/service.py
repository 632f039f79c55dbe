"""HTTP service backing the annotation workflow.

One annotation document is open at a time. Mutating requests carry the
document version they were based on; a mismatch returns 409 so a stale
client can reload instead of silently clobbering newer edits. Files on disk
change only through POST /save.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .config import ProjectConfig
from .encoding import content_hash, encode_mesh_symcode
from .errors import (InvalidOrder, OrbitMismatch, ParseError, SymcodeError)
from .mesh import (Mesh, decimate_mesh, labels_to_parts_document, load_mesh,
                   load_part_labels, object_diameter)
from .symmetry import SymmetryAnnotation, classify_vertices, load_annotation

PREVIEW_VERTEX_CAP = 50000
PREVIEW_MAX_BITS = 16
HISTOGRAM_BINS = 32


@dataclass
class AnnotationSession:
    """Mutable working copy of the annotation being edited."""

    session_id: str
    annotation: SymmetryAnnotation
    part_labels: np.ndarray
    version: int = 0
    dirty: bool = False
    last_classification: Optional[dict] = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class AnnotationBody(BaseModel):
    annotation: dict
    version: int


class PartsBody(BaseModel):
    vertex_indices: list[int]
    part_id: int
    version: int


class ClassifyBody(BaseModel):
    threshold: Optional[float] = None
    k_test: Optional[int] = None


class EncodePreviewBody(BaseModel):
    d: int = 16
    seed: int = 0


class SaveBody(BaseModel):
    version: int


def _check_version(session: AnnotationSession, version: int) -> None:
    if version != session.version:
        raise HTTPException(
            status_code=409,
            detail={"message": "document changed since this version",
                    "version": session.version})


def create_app(config: ProjectConfig, ui_dir=None) -> FastAPI:
    mesh = load_mesh(config.mesh)
    if config.parts:
        mesh = load_part_labels(mesh, config.parts)
    if config.annotation and Path(config.annotation).exists():
        annotation = load_annotation(config.annotation)
    else:
        annotation = SymmetryAnnotation()

    preview, mapping = decimate_mesh(mesh, PREVIEW_VERTEX_CAP)
    session = AnnotationSession(
        session_id=uuid.uuid4().hex,
        annotation=annotation,
        part_labels=np.array(mesh.part_labels))

    app = FastAPI(title="symcode annotation service")
    app.state.session = session
    app.state.mesh = mesh
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"detail": "malformed request body",
                                     "errors": exc.errors()})

    @app.exception_handler(ParseError)
    async def parse_error(request: Request, exc: ParseError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    def current_mesh() -> Mesh:
        return mesh.with_part_labels(session.part_labels)

    @app.get("/health")
    def health():
        return {"status": "ok", "session": session.session_id}

    @app.get("/mesh")
    def get_mesh():
        return {
            "vertices": preview.vertices.tolist(),
            "triangles": preview.triangles.tolist(),
            "part_labels": session.part_labels[mapping].tolist(),
            "mapping": mapping.tolist(),
            "vertex_count": mesh.vertex_count,
            "version": session.version,
        }

    @app.get("/annotation")
    def get_annotation():
        return {"annotation": session.annotation.to_json_dict(),
                "version": session.version}

    @app.put("/annotation")
    def put_annotation(body: AnnotationBody):
        with session.lock:
            _check_version(session, body.version)
            session.annotation = SymmetryAnnotation.from_json_dict(body.annotation)
            session.version += 1
            session.dirty = True
            session.last_classification = None
            return {"version": session.version}

    @app.post("/parts")
    def post_parts(body: PartsBody):
        with session.lock:
            _check_version(session, body.version)
            idx = np.asarray(body.vertex_indices, dtype=np.int64)
            if idx.size and (idx.min() < 0 or idx.max() >= mesh.vertex_count):
                raise HTTPException(status_code=400,
                                    detail="vertex index out of range")
            labels = session.part_labels.copy()
            labels[idx] = int(body.part_id)
            session.part_labels = labels
            session.version += 1
            session.dirty = True
            session.last_classification = None
            ids, counts = np.unique(labels, return_counts=True)
            return {"version": session.version,
                    "part_counts": {str(int(i)): int(c)
                                    for i, c in zip(ids, counts)}}

    @app.post("/classify")
    def post_classify(body: ClassifyBody):
        threshold = body.threshold or config.classify_threshold
        k_test = body.k_test or config.k_test
        work = current_mesh()
        try:
            cls = classify_vertices(work, session.annotation.candidates(work),
                                    threshold=threshold, k_test=k_test)
        except (InvalidOrder, SymcodeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        finite = cls.errors[np.isfinite(cls.errors)]
        top = float(finite.max()) if finite.size else 1.0
        edges = np.linspace(0.0, max(top, cls.threshold * 2, 1e-12),
                            HISTOGRAM_BINS + 1)
        counts, _ = np.histogram(finite, bins=edges)
        result = {
            "kinds": cls.kinds.tolist(),
            "errors": [float(e) if np.isfinite(e) else None
                       for e in cls.errors],
            "counts": cls.counts(),
            "threshold_abs": float(cls.threshold),
            "histogram": {"bin_edges": edges.tolist(),
                          "counts": counts.tolist()},
            "version": session.version,
        }
        session.last_classification = result
        return result

    @app.post("/encode-preview")
    def post_encode_preview(body: EncodePreviewBody):
        if body.d < 1 or body.d > PREVIEW_MAX_BITS:
            raise HTTPException(
                status_code=400,
                detail=f"preview d must be in [1, {PREVIEW_MAX_BITS}]")
        work = current_mesh()
        try:
            enc = encode_mesh_symcode(
                work, session.annotation, d=body.d, seed=body.seed,
                threshold=config.classify_threshold, k_test=config.k_test,
                merge_tolerance=config.merge_tolerance
                * object_diameter(work))
        except OrbitMismatch as exc:
            raise HTTPException(
                status_code=422,
                detail={"message": str(exc), "vertex_index": exc.vertex_index}
            ) from exc
        except (InvalidOrder, SymcodeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        codes = enc.vertex_codes[mapping]
        return {
            "codes": codes.tolist(),
            "d": enc.d,
            "seed": enc.seed,
            "group_count": enc.group_count,
            "vertex_count": mesh.vertex_count,
            "content_hash": content_hash(enc),
            "version": session.version,
        }

    @app.post("/save")
    def post_save(body: SaveBody):
        with session.lock:
            _check_version(session, body.version)
            ann_path = Path(config.annotation) if config.annotation else \
                config.out_path("annotation.json")
            ann_path.parent.mkdir(parents=True, exist_ok=True)
            payload = json.dumps(session.annotation.to_json_dict(), indent=2)
            ann_path.write_text(payload)
            parts_path = Path(config.parts) if config.parts else \
                config.out_path("parts.json")
            parts_path.write_text(json.dumps(
                labels_to_parts_document(session.part_labels)))
            session.dirty = False
            return {
                "content_hash": hashlib.sha256(payload.encode()).hexdigest(),
                "annotation_path": str(ann_path),
                "parts_path": str(parts_path),
                "version": session.version,
            }

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app
