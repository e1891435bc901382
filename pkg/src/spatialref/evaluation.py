"""Scoring of pipeline outputs against ground-truth labels.

Three scorers share one matching rule (same sentence, overlapping span,
one-to-one): RE identification F1, object identification per measure and
referent resolution. Precision, recall and F1 are aggregated per user (the
speaker of the labelled sentence); pooled counts are kept for diagnostics.
"""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .annotation import ReferenceType, ReferringExpression, REKind, Span
from .coref import Resolution
from .exceptions import InsufficientData, LabelMismatch, MissingFile, SchemaViolation
from .log_config import get_logger
from .metrics import Measure
from .selection import SelectionResult, best_score
from .session import Modality, SceneTable, Transcript
from .utils import read_json
from .validation import validate_label

logger = get_logger(__name__)

MATCHING_RULE = (
    "A resolved referent is correct when, after lower-casing, removing "
    "punctuation and the articles a/an/the and collapsing whitespace, it equals "
    "the label's canonical referent or one of its aliases."
)
_ARTICLES = {"a", "an", "the"}
_PUNCTUATION = re.compile(r"[^\w\s]")


@dataclass(frozen=True)
class GroundTruthLabel:
    """Hand annotation of one referring expression."""

    re_id: str
    sentence_index: int
    span: Span
    text: str
    kind: REKind
    reference_type: ReferenceType | None = None
    target_kind: str = "object"
    referent_text: str = ""
    referent_aliases: tuple[str, ...] = ()
    geometry_id: str | None = None

    @property
    def implicit(self) -> bool:
        return self.kind is REKind.IMPLICIT

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {
            "re_id": self.re_id,
            "sentence_index": self.sentence_index,
            "span": list(self.span),
            "text": self.text,
            "kind": self.kind.value,
        }
        if self.implicit:
            record.update(
                {
                    "reference_type": (
                        self.reference_type.value if self.reference_type else None
                    ),
                    "target_kind": self.target_kind,
                    "referent_text": self.referent_text,
                    "referent_aliases": list(self.referent_aliases),
                    "geometry_id": self.geometry_id,
                }
            )
        return record


# -- labels ----------------------------------------------------------------


def _find_span(text: str, needle: str) -> Span | None:
    match = re.search(rf"(?<!\w){re.escape(needle)}(?!\w)", text)
    if match is None:
        return None
    return match.start(), match.end()


def parse_label(doc: dict[str, Any], transcript: Transcript) -> GroundTruthLabel:
    """Build a label and check it against the transcript.

    A missing span is located as the first whole-word occurrence of the
    label text in its sentence.

    Raises:
        SchemaViolation: If the record is malformed
        LabelMismatch: If the sentence index or span does not fit the transcript
    """
    is_valid, error = validate_label(doc)
    if not is_valid:
        raise SchemaViolation(error or "Invalid label")
    index = doc["sentence_index"]
    if not 0 <= index < len(transcript):
        raise LabelMismatch(
            f"Label {doc['re_id']}: sentence {index} outside transcript of "
            f"{len(transcript)} sentences"
        )
    sentence_text = transcript[index].text
    if doc.get("span") is not None:
        span = (int(doc["span"][0]), int(doc["span"][1]))
    else:
        found = _find_span(sentence_text, doc["text"])
        if found is None:
            raise LabelMismatch(
                f"Label {doc['re_id']}: {doc['text']!r} not in sentence {index}"
            )
        span = found
    if sentence_text[span[0] : span[1]] != doc["text"]:
        raise LabelMismatch(
            f"Label {doc['re_id']}: span {span} does not select {doc['text']!r}"
        )
    kind = REKind(doc["kind"])
    implicit = kind is REKind.IMPLICIT
    return GroundTruthLabel(
        re_id=doc["re_id"],
        sentence_index=index,
        span=span,
        text=doc["text"],
        kind=kind,
        reference_type=ReferenceType(doc["reference_type"]) if implicit else None,
        target_kind=doc.get("target_kind", "object"),
        referent_text=doc.get("referent_text", ""),
        referent_aliases=tuple(doc.get("referent_aliases", [])),
        geometry_id=doc.get("geometry_id"),
    )


def load_labels(path: str | Path, transcript: Transcript) -> list[GroundTruthLabel]:
    """Read labels.json (``{"labels": [...]}`` or a bare list).

    Raises:
        MissingFile: If the file does not exist
        SchemaViolation: If a record is malformed
        LabelMismatch: If a label does not fit the transcript
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(path, "labels file")
    doc = read_json(path)
    records = doc.get("labels") if isinstance(doc, dict) else doc
    if not isinstance(records, list):
        raise SchemaViolation("Labels must be a list or {'labels': [...]}", path)
    labels = []
    for position, record in enumerate(records):
        try:
            labels.append(parse_label(record, transcript))
        except SchemaViolation as e:
            raise SchemaViolation(f"labels[{position}]: {e}", path) from e
    ids = [label.re_id for label in labels]
    if len(set(ids)) != len(ids):
        raise SchemaViolation("Duplicate label re_id values", path)
    return sorted(labels, key=lambda label: (label.sentence_index, label.span))


# -- matching --------------------------------------------------------------


def _overlap(a: Span, b: Span) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


@dataclass
class Matching:
    """One-to-one pairing of labels with predicted REs."""

    pairs: list[tuple[GroundTruthLabel, ReferringExpression]] = field(
        default_factory=list
    )
    unmatched_labels: list[GroundTruthLabel] = field(default_factory=list)
    unmatched_predictions: list[ReferringExpression] = field(default_factory=list)

    def prediction_for(self, label: GroundTruthLabel) -> ReferringExpression | None:
        for paired_label, prediction in self.pairs:
            if paired_label.re_id == label.re_id:
                return prediction
        return None


def match_expressions(
    predicted: Sequence[ReferringExpression], labels: Sequence[GroundTruthLabel]
) -> Matching:
    """Greedy one-to-one match on same sentence and overlapping span.

    Labels are taken in (sentence, span) order; each takes the free prediction
    with the largest overlap, the earlier start winning ties.
    """
    by_sentence: dict[int, list[ReferringExpression]] = defaultdict(list)
    for prediction in sorted(predicted, key=lambda p: (p.sentence_index, p.span)):
        by_sentence[prediction.sentence_index].append(prediction)
    used: set[str] = set()
    matching = Matching()
    for label in sorted(labels, key=lambda lb: (lb.sentence_index, lb.span)):
        candidates = [
            p
            for p in by_sentence.get(label.sentence_index, [])
            if p.id not in used and _overlap(p.span, label.span) > 0
        ]
        if not candidates:
            matching.unmatched_labels.append(label)
            continue
        chosen = max(candidates, key=lambda p: (_overlap(p.span, label.span), -p.span[0]))
        used.add(chosen.id)
        matching.pairs.append((label, chosen))
    matching.unmatched_predictions = [
        p for p in sorted(predicted, key=lambda p: p.id) if p.id not in used
    ]
    return matching


# -- precision / recall ----------------------------------------------------


@dataclass
class PRF:
    """Precision, recall and F1 from raw counts."""

    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision_undefined(self) -> bool:
        return self.tp + self.fp == 0

    @property
    def precision(self) -> float:
        return 0.0 if self.precision_undefined else self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        return 0.0 if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)

    def __add__(self, other: PRF) -> PRF:
        return PRF(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "precision_undefined": self.precision_undefined,
        }


def _speaker(transcript: Transcript, index: int) -> str:
    return transcript[index].speaker


def _pooled(per_user: Mapping[str, PRF]) -> PRF:
    total = PRF()
    for counts in per_user.values():
        total = total + counts
    return total


def score_identification(
    predicted: Sequence[ReferringExpression],
    labels: Sequence[GroundTruthLabel],
    transcript: Transcript,
    implicit_only: bool = True,
) -> dict[str, PRF]:
    """Per-user identification counts.

    A true positive is a label matched to a prediction of the same kind.
    With implicit_only, only implicit labels and predictions take part.

    Raises:
        LabelMismatch: If a label's sentence index is outside the transcript
    """
    for label in labels:
        if not 0 <= label.sentence_index < len(transcript):
            raise LabelMismatch(f"Label {label.re_id}: sentence out of range")
    if implicit_only:
        labels = [lb for lb in labels if lb.implicit]
        predicted = [p for p in predicted if p.implicit]
    per_user: dict[str, PRF] = {u: PRF() for u in sorted(transcript.participants)}
    matching = match_expressions(predicted, labels)
    for label, prediction in matching.pairs:
        user = _speaker(transcript, label.sentence_index)
        if prediction.kind is label.kind:
            per_user[user].tp += 1
        else:
            per_user[user].fp += 1
            per_user[user].fn += 1
    for label in matching.unmatched_labels:
        per_user[_speaker(transcript, label.sentence_index)].fn += 1
    for prediction in matching.unmatched_predictions:
        per_user[_speaker(transcript, prediction.sentence_index)].fp += 1
    return per_user


def identification_confusion(
    predicted: Sequence[ReferringExpression], labels: Sequence[GroundTruthLabel]
) -> dict[str, int]:
    """Raw label-kind -> predicted-kind counts ("none" when unmatched)."""
    matching = match_expressions(predicted, labels)
    counts: Counter[str] = Counter()
    for label, prediction in matching.pairs:
        kind = prediction.kind.value if prediction.kind else "none"
        counts[f"{label.kind.value}->{kind}"] += 1
    for label in matching.unmatched_labels:
        counts[f"{label.kind.value}->none"] += 1
    for prediction in matching.unmatched_predictions:
        kind = prediction.kind.value if prediction.kind else "none"
        counts[f"none->{kind}"] += 1
    return dict(sorted(counts.items()))


# -- object identification -------------------------------------------------


@dataclass
class MeasureCounts:
    correct: int = 0
    incorrect: int = 0
    none: int = 0

    @property
    def total(self) -> int:
        return self.correct + self.incorrect + self.none

    @property
    def precision(self) -> float:
        predicted = self.correct + self.incorrect
        return self.correct / predicted if predicted else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "correct": self.correct,
            "incorrect": self.incorrect,
            "none": self.none,
            "precision": self.precision,
        }


@dataclass
class ObjectIdentification:
    """Per-measure and hierarchical object-identification counts.

    Attributes:
        per_measure: Counts of each measure's top object, all REs
        overall: Counts of the hierarchy's final choice
        frequency: How often each measure won the hierarchy, split by outcome
        per_user_modality: Per user, pooled precision over pointing and
            gazing measures
        per_user_measure: Per user, counts of each measure's top object
    """

    per_measure: dict[Measure, MeasureCounts] = field(default_factory=dict)
    overall: MeasureCounts = field(default_factory=MeasureCounts)
    frequency: dict[Measure, MeasureCounts] = field(default_factory=dict)
    per_user_modality: dict[str, dict[Modality, MeasureCounts]] = field(
        default_factory=dict
    )
    per_user_measure: dict[str, dict[Measure, MeasureCounts]] = field(default_factory=dict)
    scored: int = 0

    def presence(self, measure: Measure) -> float:
        """Share of scored REs for which the measure had any object."""
        counts = self.per_measure.get(measure, MeasureCounts())
        return (counts.correct + counts.incorrect) / self.scored if self.scored else 0.0


def _selection_matches(
    selections: Sequence[SelectionResult], labels: Sequence[GroundTruthLabel]
) -> list[tuple[GroundTruthLabel, SelectionResult]]:
    as_expressions = [
        ReferringExpression(
            id=s.re_id,
            sentence_index=s.sentence_index,
            span=s.span,
            text="",
            kind=REKind.IMPLICIT,
        )
        for s in selections
    ]
    by_id = {s.re_id: s for s in selections}
    matching = match_expressions(as_expressions, [lb for lb in labels if lb.implicit])
    return [(label, by_id[pred.id]) for label, pred in matching.pairs]


def score_object_identification(
    selections: Sequence[SelectionResult],
    labels: Sequence[GroundTruthLabel],
    scene: SceneTable,
    transcript: Transcript | None = None,
) -> ObjectIdentification:
    """Judge each measure's top object against the labelled geometry.

    An object is correct when it equals the label's geometry or one is an
    ancestor of the other in the scene graph. Only implicit labels matched
    to a selection are scored.
    """
    result = ObjectIdentification(
        per_measure={m: MeasureCounts() for m in Measure},
        frequency={m: MeasureCounts() for m in Measure},
    )
    for label, selection in _selection_matches(selections, labels):
        geometry = label.geometry_id or ""
        result.scored += 1
        user = (
            _speaker(transcript, label.sentence_index)
            if transcript is not None
            else selection.speaker
        )
        modality_counts = result.per_user_modality.setdefault(
            user, {Modality.POINTER: MeasureCounts(), Modality.GAZE: MeasureCounts()}
        )
        user_measures = result.per_user_measure.setdefault(
            user, {m: MeasureCounts() for m in Measure}
        )
        for measure in Measure:
            scores = selection.scores.get(measure, [])
            buckets = (
                result.per_measure[measure],
                modality_counts[measure.modality],
                user_measures[measure],
            )
            for counts in buckets:
                if not scores:
                    counts.none += 1
                elif scene.related(best_score(scores).object_id, geometry):
                    counts.correct += 1
                else:
                    counts.incorrect += 1
        if selection.object_id is None or selection.measure is None:
            result.overall.none += 1
        elif scene.related(selection.object_id, geometry):
            result.overall.correct += 1
            result.frequency[selection.measure].correct += 1
        else:
            result.overall.incorrect += 1
            result.frequency[selection.measure].incorrect += 1
    return result


# -- resolution ------------------------------------------------------------


def normalize_referent(text: str) -> str:
    words = _PUNCTUATION.sub(" ", text.lower()).split()
    return " ".join(w for w in words if w not in _ARTICLES)


def referent_matches(referent: str, label: GroundTruthLabel) -> bool:
    accepted = {normalize_referent(label.referent_text)} | {
        normalize_referent(alias) for alias in label.referent_aliases
    }
    accepted.discard("")
    return normalize_referent(referent) in accepted


@dataclass
class CategoryCounts:
    correct: int = 0
    incorrect: int = 0
    miss_identified: int = 0

    @property
    def total(self) -> int:
        return self.correct + self.incorrect + self.miss_identified

    @property
    def prf(self) -> PRF:
        """Incorrect counts as both FP and FN, miss-identified as FN only."""
        return PRF(self.correct, self.incorrect, self.incorrect + self.miss_identified)

    def to_dict(self) -> dict[str, int]:
        return {
            "correct": self.correct,
            "incorrect": self.incorrect,
            "miss_identified": self.miss_identified,
            "total": self.total,
        }


@dataclass
class ResolutionScore:
    """Resolution outcome of one mode over all labelled implicit REs.

    Attributes:
        counts: correct + incorrect + miss_identified = labelled implicit REs
        missed_as_explicit: Labelled implicit, predicted explicit
        missed_absent: Labelled implicit, not predicted at all
        spurious: Predicted implicit REs with no implicit label, by origin
        per_user: Per-user counts (TP correct, FP incorrect + spurious)
        by_reference_type: Outcome split by endophora/exophora
        by_target_kind: Outcome split by object/place
        per_user_categories: Per category ("reference_type:exophora",
            "target_kind:place", ...), each user's outcome counts
    """

    mode: str
    counts: CategoryCounts = field(default_factory=CategoryCounts)
    missed_as_explicit: int = 0
    missed_absent: int = 0
    spurious: dict[str, int] = field(default_factory=dict)
    per_user: dict[str, PRF] = field(default_factory=dict)
    per_user_correct_rate: dict[str, float] = field(default_factory=dict)
    by_reference_type: dict[str, CategoryCounts] = field(default_factory=dict)
    by_target_kind: dict[str, CategoryCounts] = field(default_factory=dict)
    per_user_categories: dict[str, dict[str, CategoryCounts]] = field(default_factory=dict)

    @property
    def labelled(self) -> int:
        return self.counts.total

    @property
    def correct_rate(self) -> float:
        return self.counts.correct / self.labelled if self.labelled else 0.0

    @property
    def pooled(self) -> PRF:
        """Per-user counts summed; spurious REs count as FP here only."""
        return _pooled(self.per_user)

    def categories(self) -> list[tuple[str, CategoryCounts]]:
        """Pooled counts first, then each reference type and target kind."""
        groups = [("all", self.counts)]
        groups += [(f"reference_type:{k}", v) for k, v in sorted(self.by_reference_type.items())]
        groups += [(f"target_kind:{k}", v) for k, v in sorted(self.by_target_kind.items())]
        return groups


def score_resolution(
    resolutions: Sequence[Resolution],
    labels: Sequence[GroundTruthLabel],
    predicted: Sequence[ReferringExpression],
    transcript: Transcript,
    mode: str,
) -> ResolutionScore:
    """Categorize every labelled implicit RE as correct, incorrect or miss-identified.

    Args:
        resolutions: Resolutions of one mode, keyed by predicted RE id
        labels: Ground truth (all kinds)
        predicted: Every RE the annotator produced
        transcript: Transcript used to attribute sentences to users
        mode: Mode name recorded in the score
    """
    by_re = {r.re_id: r for r in resolutions}
    score = ResolutionScore(mode=mode)
    participants = sorted(transcript.participants)
    score.per_user = {u: PRF() for u in participants}
    per_user_counts = {u: CategoryCounts() for u in participants}

    def bucket(label: GroundTruthLabel) -> list[CategoryCounts]:
        ref = label.reference_type.value if label.reference_type else "unknown"
        user = _speaker(transcript, label.sentence_index)
        by_user = [
            score.per_user_categories.setdefault(category, {}).setdefault(
                user, CategoryCounts()
            )
            for category in (f"reference_type:{ref}", f"target_kind:{label.target_kind}")
        ]
        return [
            score.counts,
            score.by_reference_type.setdefault(ref, CategoryCounts()),
            score.by_target_kind.setdefault(label.target_kind, CategoryCounts()),
            per_user_counts[user],
            *by_user,
        ]

    matching = match_expressions(predicted, labels)
    spurious: Counter[str] = Counter()
    for label, prediction in matching.pairs:
        user = _speaker(transcript, label.sentence_index)
        if label.implicit and prediction.implicit:
            resolution = by_re.get(prediction.id)
            if resolution is not None and referent_matches(resolution.referent_text, label):
                for counts in bucket(label):
                    counts.correct += 1
                score.per_user[user].tp += 1
            else:
                for counts in bucket(label):
                    counts.incorrect += 1
                score.per_user[user].fp += 1
                score.per_user[user].fn += 1
        elif label.implicit:
            score.missed_as_explicit += 1
            for counts in bucket(label):
                counts.miss_identified += 1
            score.per_user[user].fn += 1
        elif prediction.implicit:
            spurious["explicit_as_implicit"] += 1
            score.per_user[user].fp += 1
    for label in matching.unmatched_labels:
        if label.implicit:
            score.missed_absent += 1
            for counts in bucket(label):
                counts.miss_identified += 1
            score.per_user[_speaker(transcript, label.sentence_index)].fn += 1
    for prediction in matching.unmatched_predictions:
        if prediction.implicit:
            spurious["non_re_as_implicit"] += 1
            score.per_user[_speaker(transcript, prediction.sentence_index)].fp += 1
    score.spurious = dict(sorted(spurious.items()))
    score.per_user_correct_rate = {
        u: (c.correct / c.total if c.total else 0.0) for u, c in per_user_counts.items()
    }
    logger.info(
        f"{mode}: {score.counts.correct} correct, {score.counts.incorrect} incorrect, "
        f"{score.counts.miss_identified} miss-identified of {score.labelled}"
    )
    return score


def improvement_points(baseline: ResolutionScore, system: ResolutionScore) -> float:
    """Percentage-point gain in correct-resolution rate."""
    return 100.0 * (system.correct_rate - baseline.correct_rate)


# -- bootstrap -------------------------------------------------------------


def bootstrap_ci(
    values: Iterable[float],
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval of the mean.

    Each resample draws from its own generator spawned from the seed, so the
    interval is reproducible and resamples are independent substreams.

    Raises:
        InsufficientData: Fewer than two values or no resamples
        ValueError: If level is not in (0, 1)
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size < 2:  # noqa: PLR2004
        raise InsufficientData(f"Bootstrap needs at least 2 values, got {arr.size}")
    if resamples < 1:
        raise InsufficientData(f"Bootstrap needs at least 1 resample, got {resamples}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if np.all(arr == arr[0]):
        return float(arr[0]), float(arr[0])
    n = arr.size
    means = np.empty(resamples, dtype=np.float64)
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(resamples)):
        means[k] = arr[np.random.default_rng(child).integers(0, n, n)].mean()
    alpha = (1.0 - level) / 2.0
    low, high = np.percentile(means, [100.0 * alpha, 100.0 * (1.0 - alpha)])
    return float(low), float(high)


def widen_to_contain(ci: tuple[float, float], point: float) -> tuple[float, float]:
    return min(ci[0], point), max(ci[1], point)
