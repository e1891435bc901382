"""Fixture corpus verification.

``fixtures/manifest.json`` lists every fixture with the SHA-256 of its files
and the artifacts its script must regenerate::

    {"fixtures": [{
        "id": "cabinets",
        "description": "...",
        "provenance": "transcribed",
        "script": "cabinets/script.json",
        "seed": 0,
        "files": {"cabinets/script.json": "<sha256>", ...},
        "expected": {"augmented": "cabinets/augmented.golden.txt",
                     "resolution_correct": {"baseline": 1, "system": 2}}
    }]}

Verification checks the hashes, generates each session twice with its seed,
runs the offline pipeline on both and compares the results with each other
and with the golden files.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .config import PipelineConfig
from .exceptions import FixtureDrift, MissingFile, SchemaViolation
from .log_config import get_logger
from .pipeline import Pipeline
from .synth import generate_synthetic_session, load_script, write_synthetic_session
from .utils import file_sha256, read_json

logger = get_logger(__name__)

MANIFEST_FILE = "manifest.json"
PROVENANCE_TAGS = ("transcribed", "synthetic")


@dataclass(frozen=True)
class FixtureEntry:
    """One manifest entry."""

    id: str
    description: str
    provenance: str
    script: str
    seed: int = 0
    files: dict[str, str] = field(default_factory=dict)
    expected: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict[str, Any], path: Path) -> FixtureEntry:
        try:
            entry = cls(
                id=doc["id"],
                description=doc.get("description", ""),
                provenance=doc["provenance"],
                script=doc["script"],
                seed=int(doc.get("seed", 0)),
                files=dict(doc.get("files", {})),
                expected=dict(doc.get("expected", {})),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaViolation(f"Bad manifest entry: {e!r}", path) from e
        if entry.provenance not in PROVENANCE_TAGS:
            raise SchemaViolation(
                f"Fixture {entry.id}: provenance must be one of {PROVENANCE_TAGS}", path
            )
        return entry


@dataclass
class FixtureResult:
    id: str
    passed: bool
    message: str = "ok"


def load_manifest(root: str | Path) -> list[FixtureEntry]:
    path = Path(root) / MANIFEST_FILE
    if not path.exists():
        raise MissingFile(path, "fixture manifest")
    doc = read_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("fixtures"), list):
        raise SchemaViolation("Manifest needs a 'fixtures' list", path)
    return [FixtureEntry.from_dict(item, path) for item in doc["fixtures"]]


def _check_hashes(root: Path, entry: FixtureEntry) -> None:
    for name, expected in sorted(entry.files.items()):
        path = root / name
        if not path.exists():
            raise FixtureDrift(path, "listed in the manifest but missing")
        actual = file_sha256(path)
        if actual != expected:
            raise FixtureDrift(path, f"sha256 {actual[:12]} != manifest {expected[:12]}")


def _directory_digest(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): file_sha256(p)
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def regenerate(root: str | Path, entry: FixtureEntry, work_dir: str | Path) -> Path:
    """Generate a fixture's bundle and run the offline pipeline on it.

    Returns:
        Path: Output directory of the pipeline run
    """
    work = Path(work_dir)
    script = load_script(Path(root) / entry.script)
    config = PipelineConfig(seed=entry.seed)
    session = generate_synthetic_session(
        script, seed=entry.seed, idt=config.idt
    )
    bundle_dir = write_synthetic_session(session, work / "bundle")
    out_dir = work / "out"
    Pipeline(bundle_dir, out_dir, config).run_all()
    return work


def verify_fixture(root: str | Path, entry: FixtureEntry) -> None:
    """Verify one fixture.

    Raises:
        FixtureDrift: Naming the first file that differs
    """
    root = Path(root)
    _check_hashes(root, entry)
    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        digest_a = _directory_digest(regenerate(root, entry, first))
        digest_b = _directory_digest(regenerate(root, entry, second))
        for name in sorted(set(digest_a) | set(digest_b)):
            if digest_a.get(name) != digest_b.get(name):
                raise FixtureDrift(
                    root / entry.script, f"regeneration is not deterministic ({name})"
                )

        golden_name = entry.expected.get("augmented")
        if golden_name:
            golden = root / golden_name
            produced = (Path(first) / "out" / "augmented.txt").read_text(encoding="utf-8")
            if produced != golden.read_text(encoding="utf-8"):
                raise FixtureDrift(golden, "regenerated augmented transcript differs")

        expected_correct = entry.expected.get("resolution_correct", {})
        if expected_correct:
            report = read_json(Path(first) / "out" / "report.json")
            for mode, count in sorted(expected_correct.items()):
                actual = report["resolution"][mode]["counts"]["correct"]
                if actual != count:
                    raise FixtureDrift(
                        root / entry.script,
                        f"{mode} resolved {actual} correctly, expected {count}",
                    )


def verify_fixtures(root: str | Path = "fixtures") -> list[FixtureResult]:
    """Verify every manifest entry; drift is reported per fixture.

    Returns:
        list[FixtureResult]: One result per manifest entry
    """
    results = []
    for entry in load_manifest(root):
        try:
            verify_fixture(root, entry)
        except FixtureDrift as e:
            logger.warning(f"Fixture {entry.id} drifted: {e}")
            results.append(FixtureResult(entry.id, False, str(e)))
        else:
            logger.info(f"Fixture {entry.id} verified")
            results.append(FixtureResult(entry.id, True))
    return results
