"""Pytest configuration and fixtures."""

from collections.abc import Callable
from pathlib import Path

import pytest

from spatialref.backends import BackendSettings
from spatialref.fixations import Fixation
from spatialref.session import (
    Modality,
    SceneObject,
    SceneTable,
    Sentence,
    Transcript,
    merge_transcripts,
)
from spatialref.synth import (
    SyntheticSession,
    generate_synthetic_session,
    load_script,
    write_synthetic_session,
)

FIXTURES_DIR = Path(__file__).parent.parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture
def scene() -> SceneTable:
    """Small apartment scene with a place hierarchy."""
    return SceneTable.from_objects(
        [
            SceneObject("kitchen", "kitchen"),
            SceneObject("living_room", "living room"),
            SceneObject("kitchen_cabinets", "kitchen cabinets", "kitchen"),
            SceneObject("sofa", "sofa", "living_room"),
            SceneObject("lamp", "lamp", "living_room"),
        ]
    )


@pytest.fixture
def make_transcript() -> Callable[..., Transcript]:
    """Build a transcript from (speaker, text, start, end) tuples."""

    def build(
        *lines: tuple[str, str, float, float],
        participants: tuple[str, str] = ("u7", "u8"),
    ) -> Transcript:
        per_speaker: dict[str, list[Sentence]] = {p: [] for p in participants}
        for speaker, text, start, end in lines:
            per_speaker.setdefault(speaker, []).append(
                Sentence.from_text(speaker, text, start, end)
            )
        return merge_transcripts(sorted(per_speaker.items()))

    return build


@pytest.fixture
def make_fixation() -> Callable[..., Fixation]:
    def build(
        user: str,
        object_id: str,
        start: float,
        end: float,
        modality: Modality = Modality.GAZE,
    ) -> Fixation:
        return Fixation(user, modality, object_id, start, end, (0.0, 0.0, -1.0))

    return build


@pytest.fixture
def cabinets_session() -> SyntheticSession:
    return generate_synthetic_session(load_script(FIXTURES_DIR / "cabinets" / "script.json"))


@pytest.fixture
def sofa_session() -> SyntheticSession:
    return generate_synthetic_session(load_script(FIXTURES_DIR / "sofa" / "script.json"))


@pytest.fixture
def cabinets_bundle(tmp_path: Path, cabinets_session: SyntheticSession) -> Path:
    """Cabinet discussion bundle directory, labels included."""
    return write_synthetic_session(cabinets_session, tmp_path / "cabinets")


@pytest.fixture
def sofa_bundle(tmp_path: Path, sofa_session: SyntheticSession) -> Path:
    return write_synthetic_session(sofa_session, tmp_path / "sofa")


@pytest.fixture
def rule_settings(scene: SceneTable) -> BackendSettings:
    return BackendSettings(scene=scene)
