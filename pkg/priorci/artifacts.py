from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any, Literal

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from priorci.errors import ArtifactError

MANIFEST_SUFFIX = ".manifest.json"


class RunManifest(BaseModel):
    """Record of the command and configuration that produced an output file."""

    model_config = ConfigDict(extra="forbid")

    command: str
    config: dict[str, Any]
    inputs: dict[str, str] = Field(default_factory=dict)
    outputs: list[str] = Field(default_factory=list)


class SplineArtifact(BaseModel):
    """Persisted form of an optimized b spline."""

    model_config = ConfigDict(extra="forbid")

    q: float
    t_quant: float
    n: int
    alpha: float
    w: float
    knots: list[float]
    values: list[float]
    objective: float | None = None
    min_coverage: float | None = None
    converged: bool = True
    manifest: RunManifest | None = None

    @property
    def knot_step(self) -> float:
        if len(self.knots) < 2:
            raise ArtifactError("Spline artifact needs at least two knots.")
        return self.knots[1] - self.knots[0]


class McRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    theta: float
    quantity: Literal["coverage", "length"]
    quadrature: float
    mc_mean: float
    mc_std_error: float
    reps: int
    seed: int
    passed: bool


class McReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rule: str
    rows: list[McRow]
    passed: bool
    manifest: RunManifest | None = None


def git_blob_sha1(payload: bytes) -> str:
    """Content hash with the same value ``git hash-object`` reports for ``payload``."""
    header = f"blob {len(payload)}\0".encode()
    return hashlib.sha1(header + payload).hexdigest()


def load_spline_artifact(path: Path) -> tuple[SplineArtifact, str]:
    """Parse a spline artifact, returning it together with its content hash."""
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise ArtifactError(f"Failed to read spline artifact {path}: {exc.strerror}") from exc
    return _parse_spline_artifact(payload, path), git_blob_sha1(payload)


def write_json_artifact(model: BaseModel, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ArtifactError(f"Failed to write {path}: {exc.strerror}") from exc


def write_table(frame: pd.DataFrame, path: Path, manifest: RunManifest) -> Path:
    """Write ``frame`` as CSV with a sidecar manifest; returns the manifest path."""
    manifest_path = path.with_name(path.name + MANIFEST_SUFFIX)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.10g")
    except OSError as exc:
        raise ArtifactError(f"Failed to write {path}: {exc.strerror}") from exc
    write_json_artifact(manifest, manifest_path)
    return manifest_path


def _parse_spline_artifact(payload: bytes, path: Path) -> SplineArtifact:
    try:
        return SplineArtifact.model_validate_json(payload)
    except ValidationError as exc:
        if any(error.get("type") == "json_invalid" for error in exc.errors()):
            raise ArtifactError(f"Spline artifact {path} is not valid JSON.") from exc
        raise ArtifactError(f"Spline artifact {path} did not match the expected schema.") from exc
