"""Test spatial RE identification and classification."""

from pathlib import Path
from unittest.mock import MagicMock

import pytest

from spatialref.annotation import (
    REKind,
    ReferringExpression,
    classify_re,
    find_expression,
    identify_spatial_res,
    implicit_only,
    make_expression,
    read_annotations,
    resolve_overlaps,
    write_annotations,
)
from spatialref.backends.rule import RuleAnnotator
from spatialref.exceptions import MalformedBackendReply, UnknownRE
from spatialref.session import Sentence, Transcript

CABINETS_IMPLICIT = [(1, "these"), (3, "it"), (4, "it")]


@pytest.fixture
def annotator(rule_settings):
    return RuleAnnotator(rule_settings)


def _found(annotator, text):
    sentence = Sentence.from_text("u7", text, 0.0, 1.0)
    return [sentence.text[a:b] for a, b in resolve_overlaps(annotator.identify(sentence))]


@pytest.mark.parametrize(
    "text,expected",
    [
        ("Or maybe these are like push ones.", ["these"]),
        ("There is no oven.", []),
        ("I like it!", ["it"]),
        ("I like this mirror", ["this mirror"]),
        ("Put it over there.", ["it", "there"]),
        ("I want this one.", ["this one"]),
        ("Not that other one.", ["that other one"]),
        ("The other one.", ["The other one"]),
        ("I remember that time.", []),
        ("I think that we should go.", []),
        ("Come here", ["here"]),
    ],
)
def test_rule_identify(annotator, text, expected):
    assert _found(annotator, text) == expected


@pytest.mark.parametrize(
    "text,re_text,expected",
    [
        ("There are no handles on the cabinets.", "the cabinets", REKind.EXPLICIT),
        ("But it's a good design overall.", "it", REKind.IMPLICIT),
        ("I like this mirror", "this mirror", REKind.EXPLICIT),
        ("Put it next to the sofa.", "it", REKind.EXPLICIT),
        ("I like it!", "it", REKind.IMPLICIT),
    ],
)
def test_rule_classify(annotator, text, re_text, expected):
    sentence = Sentence.from_text("u7", text, 0.0, 1.0)
    start = sentence.text.index(re_text)
    expression = make_expression(0, sentence, (start, start + len(re_text)))
    assert classify_re(sentence, expression, annotator) is expected


def test_classify_rejects_foreign_expression(annotator):
    sentence = Sentence.from_text("u7", "I like it!", 0.0, 1.0)
    foreign = ReferringExpression("re-0000-0000", 0, (0, 4), "this")
    with pytest.raises(UnknownRE):
        classify_re(sentence, foreign, annotator)


def test_make_expression_checks_span():
    sentence = Sentence.from_text("u7", "I like it!", 0.0, 1.0)
    with pytest.raises(ValueError):
        make_expression(0, sentence, (7, 40))


def test_resolve_overlaps_keeps_longest():
    assert resolve_overlaps([(0, 4), (0, 11), (5, 11), (12, 14)]) == [(0, 11), (12, 14)]
    assert resolve_overlaps([(0, 4), (2, 6)]) == [(0, 4)]


def test_identify_cabinets(cabinets_session, annotator):
    expressions = identify_spatial_res(cabinets_session.bundle.transcript, annotator)
    assert [(e.sentence_index, e.text) for e in implicit_only(expressions)] == CABINETS_IMPLICIT
    assert expressions[0].id == "re-0001-0009"
    for expression in expressions:
        sentence = cabinets_session.bundle.transcript[expression.sentence_index]
        a, b = expression.span
        assert sentence.text[a:b] == expression.text


def test_identify_is_order_deterministic(cabinets_session, annotator):
    transcript = cabinets_session.bundle.transcript
    serial = identify_spatial_res(transcript, annotator, max_workers=1)
    threaded = identify_spatial_res(transcript, annotator, max_workers=4)
    assert serial == threaded


def test_identify_rejects_empty_transcript(annotator):
    with pytest.raises(ValueError):
        identify_spatial_res(Transcript((), frozenset({"u7", "u8"})), annotator)


def test_malformed_reply_skips_sentence(make_transcript):
    transcript = make_transcript(
        ("u7", "I like it!", 1.0, 2.0),
        ("u8", "Move it here.", 3.0, 4.0),
    )
    backend = MagicMock()
    backend.identify.side_effect = [MalformedBackendReply("not json", "{"), [(5, 7)]]
    backend.classify.return_value = REKind.IMPLICIT

    errors: list[str] = []
    expressions = identify_spatial_res(transcript, backend, errors=errors)

    assert [(e.sentence_index, e.text) for e in expressions] == [(1, "it")]
    backend.classify.assert_called_once()
    assert len(errors) == 1
    assert errors[0].startswith("sentence 0: not json")


def test_annotations_round_trip(tmp_path: Path, cabinets_session, annotator):
    transcript = cabinets_session.bundle.transcript
    expressions = identify_spatial_res(transcript, annotator)
    path = tmp_path / "res.json"
    write_annotations(path, transcript, expressions)
    assert read_annotations(path) == expressions


def test_find_expression(cabinets_session):
    transcript = cabinets_session.bundle.transcript
    good = ReferringExpression("re-0001-0009", 1, (9, 14), "these", REKind.IMPLICIT)
    assert find_expression(transcript, good) is transcript[1]
    with pytest.raises(UnknownRE):
        find_expression(transcript, ReferringExpression("x", 99, (0, 1), "I"))
    with pytest.raises(UnknownRE):
        find_expression(transcript, ReferringExpression("x", 1, (0, 5), "these"))
