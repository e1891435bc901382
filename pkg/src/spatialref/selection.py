"""Hierarchical object-of-interest selection for implicit spatial REs.

Each RE gets a window around its sentence. All six behaviour measures are
computed over that window and the hierarchy is walked in order: the first
measure with any scored object wins, and its best-scoring object is the
selection. Downstream only sees (measure, object, speaker), never the numbers.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from tqdm import tqdm

from .annotation import ReferringExpression, Span, find_expression
from .exceptions import ConfigError, SchemaViolation
from .fixations import Fixation
from .log_config import get_logger
from .metrics import (
    DEFAULT_HIERARCHY,
    Measure,
    ObjectScore,
    concurrent_scores,
    individual_scores,
    recurrence_scores,
    shared_objects,
)
from .session import Modality, REWindow, SessionBundle, StreamKey, sentence_window
from .utils import read_jsonl, write_jsonl

logger = get_logger(__name__)

DEFAULT_LEAD_S = 4.0
DEFAULT_LAG_S = 2.0

Tiers = dict[Measure, list[ObjectScore]]


@dataclass(frozen=True)
class SelectionConfig:
    """Window and hierarchy settings.

    Attributes:
        lead: Seconds before the sentence start included in the window
        lag: Seconds after the sentence end included in the window
        hierarchy: Measure order walked by the selector
        shared_recurrence_only: Keep only objects both users fixated in
            recurrent tiers
    """

    lead: float = DEFAULT_LEAD_S
    lag: float = DEFAULT_LAG_S
    hierarchy: tuple[Measure, ...] = DEFAULT_HIERARCHY
    shared_recurrence_only: bool = True

    def validate(self) -> None:
        if self.lead < 0 or self.lag < 0:
            raise ConfigError(
                f"selection lead/lag must be >= 0, got {self.lead}/{self.lag}"
            )
        if sorted(m.value for m in self.hierarchy) != sorted(m.value for m in Measure):
            raise ConfigError(
                "selection.hierarchy must list each of the six measures exactly once"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "lead": self.lead,
            "lag": self.lag,
            "hierarchy": [m.value for m in self.hierarchy],
            "shared_recurrence_only": self.shared_recurrence_only,
        }


@dataclass(frozen=True)
class SelectionResult:
    """Winner of the hierarchy for one RE, plus every tier for diagnostics."""

    re_id: str
    sentence_index: int
    span: Span
    speaker: str
    object_id: str | None = None
    measure: Measure | None = None
    scores: Tiers = field(default_factory=dict)

    @property
    def selected(self) -> bool:
        return self.object_id is not None

    def to_record(self) -> dict[str, Any]:
        return {
            "re_id": self.re_id,
            "sentence_index": self.sentence_index,
            "span": list(self.span),
            "speaker": self.speaker,
            "object_id": self.object_id,
            "measure": self.measure.value if self.measure else None,
            "scores": {
                m.value: [s.to_record() for s in self.scores.get(m, [])]
                for m in Measure
            },
        }

    @classmethod
    def from_record(cls, doc: dict[str, Any]) -> SelectionResult:
        scores = {
            Measure(name): [ObjectScore.from_record(s) for s in items]
            for name, items in doc.get("scores", {}).items()
        }
        return cls(
            re_id=doc["re_id"],
            sentence_index=int(doc["sentence_index"]),
            span=(int(doc["span"][0]), int(doc["span"][1])),
            speaker=doc["speaker"],
            object_id=doc.get("object_id"),
            measure=Measure(doc["measure"]) if doc.get("measure") else None,
            scores=scores,
        )


def _stream(
    fixations: Mapping[StreamKey, Sequence[Fixation]], user: str, modality: Modality
) -> Sequence[Fixation]:
    return fixations.get((user, modality), [])


def compute_tiers(
    fixations: Mapping[StreamKey, Sequence[Fixation]],
    speaker: str,
    pair: tuple[str, str],
    w: REWindow,
    shared_recurrence_only: bool = True,
) -> Tiers:
    """All six score lists for one window.

    Individual measures use the speaker's own stream.
    """
    if w.duration <= 0:
        logger.warning(f"Window [{w.start}, {w.end}] is empty; no measures computed")
        return {m: [] for m in Measure}
    a, b = pair
    tiers: Tiers = {}
    for modality, concurrent, recurrent, individual in (
        (
            Modality.POINTER,
            Measure.CONCURRENT_POINTING,
            Measure.RECURRENT_POINTING,
            Measure.INDIVIDUAL_POINTING,
        ),
        (
            Modality.GAZE,
            Measure.CONCURRENT_GAZING,
            Measure.RECURRENT_GAZING,
            Measure.INDIVIDUAL_GAZING,
        ),
    ):
        fix_a = _stream(fixations, a, modality)
        fix_b = _stream(fixations, b, modality)
        tiers[concurrent] = concurrent_scores(fix_a, fix_b, w, concurrent)
        recurrent_list = recurrence_scores(fix_a, fix_b, w, recurrent)
        if shared_recurrence_only:
            both = shared_objects(fix_a, fix_b, w)
            recurrent_list = [s for s in recurrent_list if s.object_id in both]
        tiers[recurrent] = recurrent_list
        tiers[individual] = individual_scores(
            _stream(fixations, speaker, modality), w, individual
        )
    return tiers


def best_score(scores: Sequence[ObjectScore]) -> ObjectScore:
    """Largest value, then largest raw duration, then smallest object id."""
    return min(scores, key=lambda s: (-s.value, -s.raw_duration, s.object_id))


def pick_winner(
    tiers: Mapping[Measure, Sequence[ObjectScore]],
    hierarchy: Sequence[Measure] = DEFAULT_HIERARCHY,
) -> ObjectScore | None:
    """Best object of the first non-empty tier in hierarchy order."""
    for measure in hierarchy:
        scores = tiers.get(measure, [])
        if scores:
            return best_score(scores)
    return None


def select_object(
    re: ReferringExpression,
    bundle: SessionBundle,
    fixations: Mapping[StreamKey, Sequence[Fixation]],
    cfg: SelectionConfig,
) -> SelectionResult:
    """Pick the object of interest for one implicit RE.

    Args:
        re: Implicit referring expression from the bundle's transcript
        bundle: Session the RE was spoken in
        fixations: Fixations per (user, modality)
        cfg: Window and hierarchy settings

    Returns:
        SelectionResult: Winner (possibly none) and all tier scores

    Raises:
        UnknownRE: If the RE is not part of the bundle's transcript
        ValueError: If the RE is not implicit
    """
    sentence = find_expression(bundle.transcript, re)
    if not re.implicit:
        raise ValueError(f"{re.id} is not an implicit RE")
    participants = bundle.participants
    pair = (participants[0], participants[1])
    w = sentence_window(sentence, cfg.lead, cfg.lag)
    tiers = compute_tiers(
        fixations, sentence.speaker, pair, w, cfg.shared_recurrence_only
    )
    winner = pick_winner(tiers, cfg.hierarchy)
    logger.debug(
        f"{re.id} {re.text!r} window [{w.start:.3f}, {w.end:.3f}]: "
        + ", ".join(f"{m.value}={len(tiers[m])}" for m in cfg.hierarchy)
    )
    return SelectionResult(
        re_id=re.id,
        sentence_index=re.sentence_index,
        span=re.span,
        speaker=sentence.speaker,
        object_id=winner.object_id if winner else None,
        measure=winner.measure if winner else None,
        scores=tiers,
    )


def select_all(
    res: Iterable[ReferringExpression],
    bundle: SessionBundle,
    fixations: Mapping[StreamKey, Sequence[Fixation]],
    cfg: SelectionConfig,
    max_workers: int = 1,
    show_progress: bool = False,
) -> list[SelectionResult]:
    """Run select_object for every implicit RE, ordered by RE id."""
    implicit = sorted((re for re in res if re.implicit), key=lambda re: re.id)
    if max_workers <= 1:
        results = [
            select_object(re, bundle, fixations, cfg)
            for re in tqdm(implicit, desc="Selecting", disable=not show_progress)
        ]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(
                pool.map(lambda re: select_object(re, bundle, fixations, cfg), implicit)
            )
    chosen = sum(1 for r in results if r.selected)
    logger.info(f"Selected an object for {chosen} of {len(results)} implicit REs")
    return results


def write_selections(path: str | Path, results: Iterable[SelectionResult]) -> int:
    """Write the selection trace, one JSON object per RE."""
    return write_jsonl(path, (r.to_record() for r in results))


def read_selections(path: str | Path) -> list[SelectionResult]:
    results = []
    for line_no, doc in read_jsonl(path):
        try:
            results.append(SelectionResult.from_record(doc))
        except (KeyError, ValueError, TypeError) as e:
            raise SchemaViolation(f"Bad selection record: {e}", path, line_no) from e
    return results
