"""Test synthetic session generation."""

import copy
import json
from pathlib import Path

import pytest

from spatialref.exceptions import InconsistentScript
from spatialref.fixations import IdtParams, detect_fixations
from spatialref.session import Modality, load_bundle
from spatialref.synth import NoiseParams, SynthScript, generate_synthetic_session

BASE_SCRIPT = {
    "fixture_id": "unit",
    "participants": ["P1", "P2"],
    "start": 0.0,
    "end": 4.0,
    "objects": [
        {"id": "living_room", "name": "living room"},
        {"id": "sofa", "name": "sofa", "parent_id": "living_room", "position": [0.0, 0.5, -2.0]},
        {"id": "lamp", "name": "lamp", "parent_id": "living_room", "position": [1.5, 1.0, -1.0]},
    ],
    "fixations": [
        {"user": "P1", "modality": "gaze", "object_id": "sofa", "start": 0.5, "end": 2.0},
        {"user": "P2", "modality": "gaze", "object_id": "lamp", "start": 1.0, "end": 1.5},
        {"user": "P1", "modality": "pointer", "object_id": "sofa", "start": 2.5, "end": 3.0},
    ],
    "sentences": [
        {"speaker": "P1", "start": 1.0, "end": 2.0, "text": "Look at it."},
        {"speaker": "P2", "start": 2.5, "end": 3.5, "text": "Nice."},
    ],
    "labels": [
        {
            "re_id": "unit-1",
            "sentence_index": 0,
            "text": "it",
            "kind": "implicit",
            "reference_type": "exophora",
            "geometry_id": "sofa",
            "referent_text": "sofa",
        }
    ],
}


def _script(mutate=None):
    doc = copy.deepcopy(BASE_SCRIPT)
    if mutate is not None:
        mutate(doc)
    return SynthScript.from_dict(doc)


def test_generates_streams_transcript_and_labels():
    session = generate_synthetic_session(_script())
    bundle = session.bundle
    assert set(bundle.streams) == {
        ("P1", Modality.GAZE),
        ("P2", Modality.GAZE),
        ("P1", Modality.POINTER),
    }
    assert [s.text for s in bundle.transcript.sentences] == ["Look at it.", "Nice."]
    assert [lb.span for lb in session.labels] == [(8, 10)]
    gaze = bundle.streams[("P1", Modality.GAZE)]
    assert len(gaze.samples) == 481
    assert gaze.samples[-1].t == 4.0


def test_idle_samples():
    bundle = generate_synthetic_session(_script()).bundle
    gaze = bundle.streams[("P1", Modality.GAZE)].samples
    pointer = bundle.streams[("P1", Modality.POINTER)].samples
    assert gaze[0].object_id is None and gaze[0].active
    assert not pointer[0].active
    assert pointer[300].object_id == "sofa" and pointer[300].active


def test_same_seed_same_session():
    first = generate_synthetic_session(_script(), NoiseParams(0.1), seed=4)
    second = generate_synthetic_session(_script(), NoiseParams(0.1), seed=4)
    other = generate_synthetic_session(_script(), NoiseParams(0.1), seed=5)
    assert first == second
    assert first.bundle.streams != other.bundle.streams


def test_zero_noise_gives_exact_boundaries():
    bundle = generate_synthetic_session(_script(), NoiseParams(0.0)).bundle
    fixations = detect_fixations(bundle.streams[("P2", Modality.GAZE)], IdtParams())
    assert [(f.object_id, f.start, f.end) for f in fixations] == [("lamp", 1.0, 1.5)]


def _overlap(doc):
    doc["fixations"].append(
        {"user": "P1", "modality": "gaze", "object_id": "lamp", "start": 1.5, "end": 2.5}
    )


def _unknown_user(doc):
    doc["fixations"][0]["user"] = "P3"


def _no_position(doc):
    doc["fixations"][0]["object_id"] = "living_room"


def _outside(doc):
    doc["fixations"][0]["end"] = 5.0


def _empty_fixation(doc):
    doc["fixations"][0]["end"] = doc["fixations"][0]["start"]


def _unordered_sentences(doc):
    doc["sentences"].reverse()


def _unknown_parent(doc):
    doc["objects"][1]["parent_id"] = "kitchen"


def _duplicate_object(doc):
    doc["objects"].append(doc["objects"][1])


def _label_off_script(doc):
    doc["labels"][0]["text"] = "that"


def _label_unknown_geometry(doc):
    doc["labels"][0]["geometry_id"] = "oven"


def _same_participants(doc):
    doc["participants"] = ["P1", "P1"]


@pytest.mark.parametrize(
    "mutate",
    [
        _overlap,
        _unknown_user,
        _no_position,
        _outside,
        _empty_fixation,
        _unordered_sentences,
        _unknown_parent,
        _duplicate_object,
        _label_off_script,
        _label_unknown_geometry,
        _same_participants,
    ],
)
def test_inconsistent_scripts(mutate):
    with pytest.raises(InconsistentScript):
        generate_synthetic_session(_script(mutate))


def test_malformed_script_documents():
    with pytest.raises(InconsistentScript):
        _script(lambda doc: doc.pop("objects"))
    with pytest.raises(InconsistentScript, match="two participants"):
        _script(lambda doc: doc["participants"].append("P3"))


def test_jitter_must_stay_inside_dispersion():
    with pytest.raises(InconsistentScript, match="Jitter"):
        generate_synthetic_session(_script(), NoiseParams(0.25))
    generate_synthetic_session(_script(), NoiseParams(0.3), idt=IdtParams(dispersion_deg=1.0))


def test_write_synthetic_session(sofa_bundle: Path):
    labels = json.loads((sofa_bundle / "labels.json").read_text())["labels"]
    assert labels
    assert {p.name for p in sofa_bundle.iterdir()} >= {
        "scene.json",
        "transcript_P1.json",
        "transcript_P2.json",
        "gaze_P1.jsonl",
        "gaze_P2.jsonl",
        "pointer_P1.jsonl",
        "labels.json",
    }
    assert len(load_bundle(sofa_bundle).transcript) > 0
