"""Test fixture manifest loading and drift detection."""

import json
import shutil
from pathlib import Path

import pytest

from spatialref.exceptions import FixtureDrift, MissingFile, SchemaViolation
from spatialref.fixtures import load_manifest, verify_fixture, verify_fixtures
from spatialref.utils import file_sha256


@pytest.fixture
def fixture_copy(tmp_path: Path, fixtures_dir: Path) -> Path:
    root = tmp_path / "fixtures"
    shutil.copytree(fixtures_dir, root)
    return root


def _entry(root: Path, fixture_id: str):
    return next(e for e in load_manifest(root) if e.id == fixture_id)


def test_manifest_lists_every_fixture(fixtures_dir):
    entries = load_manifest(fixtures_dir)
    assert [e.id for e in entries] == ["cabinets", "sofa"]
    assert {e.provenance for e in entries} == {"transcribed", "synthetic"}
    for entry in entries:
        assert entry.script in entry.files
        assert entry.expected["augmented"] in entry.files


def test_untouched_corpus_passes(fixtures_dir):
    results = verify_fixtures(fixtures_dir)
    assert [(r.id, r.passed) for r in results] == [("cabinets", True), ("sofa", True)]


def test_edited_file_breaks_hash(fixture_copy: Path):
    script = fixture_copy / "cabinets" / "script.json"
    script.write_text(script.read_text().replace('"end": 171.0', '"end": 170.0'))
    with pytest.raises(FixtureDrift, match="sha256"):
        verify_fixture(fixture_copy, _entry(fixture_copy, "cabinets"))


def test_golden_mismatch_after_rehash(fixture_copy: Path):
    """A golden file edited together with its hash still fails regeneration."""
    golden = fixture_copy / "sofa" / "augmented.golden.txt"
    golden.write_text(golden.read_text().replace("pointing at", "looking at"))
    manifest_path = fixture_copy / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    for item in manifest["fixtures"]:
        if item["id"] == "sofa":
            item["files"]["sofa/augmented.golden.txt"] = file_sha256(golden)
    manifest_path.write_text(json.dumps(manifest))

    with pytest.raises(FixtureDrift, match="augmented transcript differs"):
        verify_fixture(fixture_copy, _entry(fixture_copy, "sofa"))


def test_wrong_expected_count(fixture_copy: Path):
    manifest_path = fixture_copy / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["fixtures"][0]["expected"]["resolution_correct"]["system"] = 3
    manifest_path.write_text(json.dumps(manifest))
    results = verify_fixtures(fixture_copy)
    assert [(r.id, r.passed) for r in results] == [("cabinets", False), ("sofa", True)]
    assert "system resolved 2 correctly, expected 3" in results[0].message


def test_manifest_errors(tmp_path: Path):
    with pytest.raises(MissingFile):
        load_manifest(tmp_path)
    (tmp_path / "manifest.json").write_text(json.dumps({"fixtures": [{"id": "x"}]}))
    with pytest.raises(SchemaViolation):
        load_manifest(tmp_path)
    (tmp_path / "manifest.json").write_text(
        json.dumps({"fixtures": [{"id": "x", "provenance": "imagined", "script": "x.json"}]})
    )
    with pytest.raises(SchemaViolation, match="provenance"):
        load_manifest(tmp_path)
