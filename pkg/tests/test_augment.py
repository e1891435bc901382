"""Test annotation templates and augmented transcript rendering."""

import json
from pathlib import Path

import pytest

from spatialref.augment import (
    AugmentedSentence,
    TranscriptRendering,
    annotated_names,
    augment_transcript,
    check_token_budget,
    read_renderings,
    render_annotation,
    render_line,
    render_plain,
    strip_annotations,
    write_augmented,
)
from spatialref.exceptions import DanglingSelection, MissingObjectName, SchemaViolation
from spatialref.metrics import Measure
from spatialref.selection import SelectionResult


def _selection(sentence_index, span, speaker, object_id, measure, re_id=None):
    return SelectionResult(
        re_id=re_id or f"re-{sentence_index:04d}-{span[0]:04d}",
        sentence_index=sentence_index,
        span=span,
        speaker=speaker,
        object_id=object_id,
        measure=measure,
    )


@pytest.mark.parametrize(
    "measure,speaker,object_id,expected",
    [
        (Measure.INDIVIDUAL_POINTING, "u7", "sofa", "[u7 was pointing at the sofa]"),
        (
            Measure.CONCURRENT_GAZING,
            "u8",
            "kitchen_cabinets",
            "[u7 and u8 concurrently looking at the kitchen cabinets]",
        ),
        (Measure.INDIVIDUAL_GAZING, "u8", "lamp", "[u8 looking at the lamp]"),
        (Measure.RECURRENT_GAZING, "u7", "lamp", "[u7 and u8 recurrently looking at the lamp]"),
        (
            Measure.CONCURRENT_POINTING,
            "u7",
            "sofa",
            "[u7 and u8 concurrently pointing at the sofa]",
        ),
        (
            Measure.RECURRENT_POINTING,
            "u8",
            "living_room",
            "[u7 and u8 recurrently pointing at the living room]",
        ),
    ],
)
def test_render_annotation(scene, measure, speaker, object_id, expected):
    sel = _selection(0, (0, 2), speaker, object_id, measure)
    assert render_annotation(sel, scene, ("u8", "u7")) == expected


def test_render_annotation_errors(scene):
    with pytest.raises(MissingObjectName):
        render_annotation(
            _selection(0, (0, 2), "u7", "oven", Measure.INDIVIDUAL_GAZING), scene, ("u7", "u8")
        )
    with pytest.raises(ValueError):
        render_annotation(_selection(0, (0, 2), "u7", None, None), scene, ("u7", "u8"))


def test_render_line_timestamp(make_transcript):
    transcript = make_transcript(("P1", "This looks weird.", 60.0, 61.0), participants=("P1", "P2"))
    line = render_line(transcript[0], ["[P1 was pointing at the sofa]"])
    assert line == "[01:00] P1 : This looks weird. [P1 was pointing at the sofa]"


def test_augment_transcript_span_order(scene, make_transcript):
    transcript = make_transcript(
        ("u7", "Put this over there.", 10.0, 12.0),
        ("u8", "Sure.", 13.0, 14.0),
    )
    selections = [
        _selection(0, (14, 19), "u7", "kitchen", Measure.INDIVIDUAL_POINTING),
        _selection(0, (4, 8), "u7", "sofa", Measure.CONCURRENT_GAZING),
    ]
    augmented = augment_transcript(transcript, selections, scene)
    assert augmented[0].annotations == (
        "[u7 and u8 concurrently looking at the sofa]",
        "[u7 was pointing at the kitchen]",
    )
    assert augmented[1].annotations == ()


def test_unselected_expressions_add_nothing(scene, make_transcript):
    transcript = make_transcript(("u7", "I like it!", 1.0, 2.0))
    augmented = augment_transcript(
        transcript, [_selection(0, (7, 9), "u7", None, None)], scene
    )
    assert augmented == [AugmentedSentence(transcript[0])]


def test_dangling_selection(scene, make_transcript):
    transcript = make_transcript(("u7", "I like it!", 1.0, 2.0))
    with pytest.raises(DanglingSelection):
        augment_transcript(
            transcript, [_selection(3, (0, 1), "u7", "sofa", Measure.INDIVIDUAL_GAZING)], scene
        )


def test_stripping_annotations_gives_plain_transcript(scene, make_transcript):
    transcript = make_transcript(
        ("u7", "Look at this [draft] plan.", 1.0, 2.0),
        ("u8", "Move it here.", 3.0, 4.0),
    )
    selections = [
        _selection(0, (8, 12), "u7", "lamp", Measure.INDIVIDUAL_GAZING),
        _selection(1, (5, 7), "u8", "sofa", Measure.CONCURRENT_GAZING),
        _selection(1, (8, 12), "u8", "living_room", Measure.INDIVIDUAL_POINTING),
    ]
    augmented = augment_transcript(transcript, selections, scene)
    plain = render_plain(transcript)
    for line, expected in zip(augmented, plain.lines):
        assert strip_annotations(line.render()) == expected


@pytest.mark.parametrize(
    "text",
    ["I love it [laughs]", "Put it there [inaudible] [laughs]", "[laughs] I like it"],
)
def test_bracketed_speech_survives_stripping(scene, make_transcript, text):
    transcript = make_transcript(("u7", text, 1.0, 2.0))
    plain = render_plain(transcript).lines[0]
    assert strip_annotations(plain) == plain
    augmented = augment_transcript(
        transcript, [_selection(0, (0, 1), "u7", "lamp", Measure.INDIVIDUAL_GAZING)], scene
    )
    assert augmented[0].render() == plain + " [u7 looking at the lamp]"
    assert strip_annotations(augmented[0].render()) == plain


def test_annotated_names_in_rendered_order():
    line = (
        "[00:01] u7 : Put this over here [laughs] [u7 looking at the lamp]"
        " [u7 and u8 recurrently pointing at the living room]"
    )
    assert annotated_names(line) == ["lamp", "living room"]
    assert strip_annotations(line) == "[00:01] u7 : Put this over here [laughs]"
    assert annotated_names("[00:01] u7 : I love it [laughs]") == []


def test_write_and_read_renderings(tmp_path: Path, scene, make_transcript):
    transcript = make_transcript(("u7", "I like it!", 1.0, 2.0))
    augmented = augment_transcript(
        transcript, [_selection(0, (7, 9), "u7", "lamp", Measure.INDIVIDUAL_GAZING)], scene
    )
    plain, rendered = write_augmented(tmp_path, augmented)
    assert (tmp_path / "plain.txt").read_text() == "[00:01] u7 : I like it!\n"
    assert (tmp_path / "augmented.txt").read_text() == (
        "[00:01] u7 : I like it! [u7 looking at the lamp]\n"
    )
    doc = json.loads((tmp_path / "augmented.json").read_text())
    assert doc["sentences"][0]["annotations"] == ["[u7 looking at the lamp]"]
    assert read_renderings(tmp_path / "augmented.json") == (plain, rendered)


def test_read_renderings_rejects_mismatch(tmp_path: Path):
    path = tmp_path / "augmented.json"
    path.write_text(json.dumps({"plain": ["a"], "augmented": []}))
    with pytest.raises(SchemaViolation):
        read_renderings(path)


def test_token_budget():
    rendering = TranscriptRendering(("[00:01] u7 : I like it!",))
    assert rendering.token_count() == 6
    assert check_token_budget(rendering, budget=6)
    assert not check_token_budget(rendering, budget=5)


def test_cabinets_golden(cabinets_session, fixtures_dir):
    """Selections worked out by hand for the cabinet discussion."""
    bundle = cabinets_session.bundle
    selections = [
        _selection(1, (9, 14), "u7", "kitchen_cabinets", Measure.CONCURRENT_GAZING),
        _selection(3, (4, 6), "u8", "kitchen_cabinets", Measure.INDIVIDUAL_GAZING),
        _selection(4, (44, 46), "u7", "lamp", Measure.INDIVIDUAL_GAZING),
    ]
    augmented = augment_transcript(bundle.transcript, selections, bundle.scene)
    rendered = "".join(a.render() + "\n" for a in augmented)
    assert rendered == (fixtures_dir / "cabinets" / "augmented.golden.txt").read_text()
