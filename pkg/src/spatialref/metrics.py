"""Per-window behaviour measures: concurrent, recurrent and individual attention.

All measures work on fixations clipped to the RE window. Interval overlap is
computed with a two-pointer sweep over merged, sorted intervals.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

from .exceptions import EmptyWindow
from .fixations import Fixation
from .log_config import get_logger
from .session import Modality, REWindow

logger = get_logger(__name__)

Interval = tuple[float, float]


class Measure(str, Enum):
    """The six behaviour measures, in default hierarchy order."""

    CONCURRENT_POINTING = "concurrent-pointing"
    RECURRENT_POINTING = "recurrent-pointing"
    INDIVIDUAL_POINTING = "individual-pointing"
    CONCURRENT_GAZING = "concurrent-gazing"
    RECURRENT_GAZING = "recurrent-gazing"
    INDIVIDUAL_GAZING = "individual-gazing"

    @property
    def modality(self) -> Modality:
        return Modality.POINTER if self.value.endswith("pointing") else Modality.GAZE

    @property
    def kind(self) -> str:
        """'concurrent', 'recurrent' or 'individual'."""
        return self.value.split("-", 1)[0]


DEFAULT_HIERARCHY: tuple[Measure, ...] = tuple(Measure)


@dataclass(frozen=True)
class ObjectScore:
    """Score of one object under one measure within one window."""

    object_id: str
    measure: Measure
    value: float
    raw_duration: float

    def to_record(self) -> dict[str, Any]:
        return {
            "object_id": self.object_id,
            "measure": self.measure.value,
            "value": self.value,
            "raw_duration": self.raw_duration,
        }

    @classmethod
    def from_record(cls, doc: dict[str, Any]) -> ObjectScore:
        return cls(
            object_id=doc["object_id"],
            measure=Measure(doc["measure"]),
            value=float(doc["value"]),
            raw_duration=float(doc["raw_duration"]),
        )


def clip(fixations: Iterable[Fixation], w: REWindow) -> dict[str, list[Interval]]:
    """Intersect fixations with a window, grouped by object."""
    by_object: dict[str, list[Interval]] = defaultdict(list)
    for fix in fixations:
        start, end = max(fix.start, w.start), min(fix.end, w.end)
        if end > start:
            by_object[fix.object_id].append((start, end))
    return by_object


def merge_intervals(intervals: Iterable[Interval]) -> list[Interval]:
    """Union of intervals as a sorted list of disjoint intervals."""
    merged: list[Interval] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            if end > merged[-1][1]:
                merged[-1] = (merged[-1][0], end)
        else:
            merged.append((start, end))
    return merged


def covered(intervals: Iterable[Interval]) -> float:
    return sum(end - start for start, end in merge_intervals(intervals))


def overlap_duration(a: Sequence[Interval], b: Sequence[Interval]) -> float:
    """Total time covered by both interval sets (two-pointer sweep)."""
    left, right = merge_intervals(a), merge_intervals(b)
    i = j = 0
    total = 0.0
    while i < len(left) and j < len(right):
        start = max(left[i][0], right[j][0])
        end = min(left[i][1], right[j][1])
        if end > start:
            total += end - start
        if left[i][1] < right[j][1]:
            i += 1
        else:
            j += 1
    return total


def _require_duration(w: REWindow) -> float:
    if w.duration <= 0:
        raise EmptyWindow(f"Window [{w.start}, {w.end}] has zero duration")
    return w.duration


def _by_value(scores: list[ObjectScore]) -> list[ObjectScore]:
    return sorted(scores, key=lambda s: (-s.value, -s.raw_duration, s.object_id))


def concurrent_scores(
    fix_a: Sequence[Fixation],
    fix_b: Sequence[Fixation],
    w: REWindow,
    measure: Measure | None = None,
) -> list[ObjectScore]:
    """Share of the window during which both users fixate the same object.

    Raises:
        EmptyWindow: If the window has zero duration
    """
    duration = _require_duration(w)
    measure = measure or _measure_for("concurrent", fix_a, fix_b)
    clipped_a, clipped_b = clip(fix_a, w), clip(fix_b, w)
    scores = []
    for object_id in sorted(clipped_a.keys() & clipped_b.keys()):
        raw = overlap_duration(clipped_a[object_id], clipped_b[object_id])
        if raw > 0:
            scores.append(ObjectScore(object_id, measure, raw / duration, raw))
    return _by_value(scores)


def recurrence_scores(
    fix_a: Sequence[Fixation],
    fix_b: Sequence[Fixation],
    w: REWindow,
    measure: Measure | None = None,
) -> list[ObjectScore]:
    """(A's time on o + B's time on o) / (2 x window duration), per object.

    Raises:
        EmptyWindow: If the window has zero duration
    """
    duration = _require_duration(w)
    measure = measure or _measure_for("recurrent", fix_a, fix_b)
    clipped_a, clipped_b = clip(fix_a, w), clip(fix_b, w)
    scores = []
    for object_id in sorted(clipped_a.keys() | clipped_b.keys()):
        raw = covered(clipped_a.get(object_id, [])) + covered(
            clipped_b.get(object_id, [])
        )
        if raw > 0:
            scores.append(ObjectScore(object_id, measure, raw / (2 * duration), raw))
    return _by_value(scores)


def individual_scores(
    fix: Sequence[Fixation],
    w: REWindow,
    measure: Measure | None = None,
) -> list[ObjectScore]:
    """D(o) / T for one user: each object's share of all fixated time in w."""
    measure = measure or _measure_for("individual", fix)
    per_object = {o: covered(iv) for o, iv in clip(fix, w).items()}
    total = sum(per_object.values())
    if total <= 0:
        return []
    return _by_value(
        [
            ObjectScore(object_id, measure, raw / total, raw)
            for object_id, raw in sorted(per_object.items())
            if raw > 0
        ]
    )


def shared_objects(
    fix_a: Sequence[Fixation], fix_b: Sequence[Fixation], w: REWindow
) -> set[str]:
    """Objects both users fixate at some point inside the window."""
    return set(clip(fix_a, w)) & set(clip(fix_b, w))


def _measure_for(kind: str, *groups: Sequence[Fixation]) -> Measure:
    for group in groups:
        if group:
            suffix = "pointing" if group[0].modality is Modality.POINTER else "gazing"
            return Measure(f"{kind}-{suffix}")
    return Measure(f"{kind}-gazing")


def write_scores_csv(
    path: str | Path, rows: Iterable[tuple[str, ObjectScore]]
) -> int:
    """Write (re_id, measure, object, value) rows for offline analysis."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["re_id", "measure", "object", "value"])
        for re_id, score in rows:
            writer.writerow([re_id, score.measure.value, score.object_id, score.value])
            count += 1
    return count
