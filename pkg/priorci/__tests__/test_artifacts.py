from __future__ import annotations

from pathlib import Path

import pandas as pd
import pytest

from priorci.artifacts import (
    MANIFEST_SUFFIX,
    RunManifest,
    git_blob_sha1,
    load_spline_artifact,
    write_json_artifact,
    write_table,
)
from priorci.errors import ArtifactError
from priorci.spline_b import MonotoneCubicB


def test_git_blob_sha1_matches_git_hash_object() -> None:
    assert git_blob_sha1(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_spline_json_reemits_byte_identical(tmp_path: Path) -> None:
    manifest = RunManifest(command="optimize-b", config={"n": 24}, outputs=["spline.json"])
    artifact = MonotoneCubicB.standard(8.0, 2.068658).to_artifact(
        24, 0.05, 0.1, objective=0.0, min_coverage=0.95, manifest=manifest
    )
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"

    write_json_artifact(artifact, first)
    reloaded, digest = load_spline_artifact(first)
    write_json_artifact(reloaded, second)

    assert second.read_bytes() == first.read_bytes()
    assert digest == git_blob_sha1(first.read_bytes())
    assert reloaded.manifest == manifest


def test_load_rejects_invalid_json(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text('{"q": 8.0,', encoding="utf-8")

    with pytest.raises(ArtifactError, match="not valid JSON"):
        load_spline_artifact(path)


def test_load_rejects_schema_mismatch(tmp_path: Path) -> None:
    path = tmp_path / "partial.json"
    path.write_text('{"q": 8.0, "unexpected": true}', encoding="utf-8")

    with pytest.raises(ArtifactError, match="expected schema"):
        load_spline_artifact(path)


def test_load_reports_missing_files(tmp_path: Path) -> None:
    with pytest.raises(ArtifactError, match="Failed to read"):
        load_spline_artifact(tmp_path / "nope.json")


def test_write_table_adds_a_sidecar_manifest(tmp_path: Path) -> None:
    out = tmp_path / "tables" / "efficiency.csv"
    frame = pd.DataFrame({"theta": [0.0, 0.5], "efficiency": [0.8016, 0.85]})
    manifest = RunManifest(command="efficiency-table", config={"w": 0.1}, outputs=[str(out)])

    manifest_path = write_table(frame, out, manifest)

    assert manifest_path == out.with_name("efficiency.csv" + MANIFEST_SUFFIX)
    assert pd.read_csv(out).columns.tolist() == ["theta", "efficiency"]
    assert RunManifest.model_validate_json(manifest_path.read_text(encoding="utf-8")) == manifest
