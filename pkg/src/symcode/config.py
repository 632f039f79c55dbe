"""Project configuration shared by the CLI commands and the service."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .encoding import DEFAULT_BITS, MAX_BITS
from .errors import ConfigMismatch, ParseError
from .symmetry import DEFAULT_K_TEST, DEFAULT_THRESHOLD

LOG_ENV_VAR = "SYMCODE_LOG"


@dataclass(frozen=True)
class ProjectConfig:
    """Paths and knobs for one object's pipeline.

    Thresholds are fractions of the object diameter; absolute lengths are
    derived where they are used.
    """

    mesh: str
    annotation: str = None
    parts: str = None
    camera: str = None
    output_dir: str = "out"
    d: int = DEFAULT_BITS
    seed: int = 0
    classify_threshold: float = DEFAULT_THRESHOLD
    merge_tolerance: float = 1e-4
    k_test: int = DEFAULT_K_TEST

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1 or self.d > MAX_BITS:
            raise ConfigMismatch(f"d must be in [1, {MAX_BITS}], got {self.d!r}")
        if self.classify_threshold <= 0 or self.merge_tolerance <= 0:
            raise ConfigMismatch("thresholds must be positive")

    def out_path(self, name: str) -> Path:
        out = Path(self.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return out / name


def load_config(path, **overrides) -> ProjectConfig:
    """Read a JSON config; referenced input files must exist.

    The annotation path is exempt from the existence check: it is also the
    save target of the annotation workflow, so a fresh project points at a
    file that does not exist yet.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigMismatch(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    known = {f for f in ProjectConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ConfigMismatch(f"{path}: unknown config keys {sorted(unknown)}")
    if "mesh" not in doc:
        raise ConfigMismatch(f"{path}: config needs a mesh path")
    if "d" in doc:
        doc["d"] = int(doc["d"]) if not isinstance(doc["d"], bool) else doc["d"]
    cfg = ProjectConfig(**doc)
    clean = {k: v for k, v in overrides.items() if v is not None}
    if clean:
        cfg = replace(cfg, **clean)

    base = path.parent
    resolved = {}
    for key in ("mesh", "annotation", "parts", "camera"):
        value = getattr(cfg, key)
        if value is None:
            continue
        p = Path(value)
        if not p.is_absolute():
            p = base / p
        if key != "annotation" and not p.exists():
            raise ConfigMismatch(f"{path}: {key} file not found: {p}")
        resolved[key] = str(p)
    out = Path(cfg.output_dir)
    if not out.is_absolute():
        resolved["output_dir"] = str(base / out)
    return replace(cfg, **resolved)


def setup_logging() -> logging.Logger:
    """Logger honoring the SYMCODE_LOG environment variable."""
    level = os.environ.get(LOG_ENV_VAR, "WARNING").upper()
    logger = logging.getLogger("symcode")
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        logger.addHandler(handler)
    try:
        logger.setLevel(level)
    except ValueError:
        logger.setLevel(logging.WARNING)
    return logger
