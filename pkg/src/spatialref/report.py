"""Evaluation report: aggregation, recommendations and CSV tables."""

from __future__ import annotations

import csv
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .annotation import ReferringExpression
from .config import EvaluationConfig
from .coref import Resolution, ResolutionMode
from .evaluation import (
    MATCHING_RULE,
    PRF,
    CategoryCounts,
    GroundTruthLabel,
    MeasureCounts,
    ObjectIdentification,
    ResolutionScore,
    bootstrap_ci,
    identification_confusion,
    improvement_points,
    score_identification,
    score_object_identification,
    score_resolution,
    widen_to_contain,
)
from .exceptions import InsufficientData
from .log_config import get_logger
from .metrics import Measure
from .selection import SelectionResult
from .session import Modality, SceneTable, Transcript
from .utils import write_json

logger = get_logger(__name__)

PERCENT = 100.0
LOW_RECALL = 0.8


@dataclass(frozen=True)
class Interval:
    """Bootstrap interval around a mean of per-user values."""

    point: float
    low: float
    high: float

    def to_dict(self) -> dict[str, float]:
        return {"point": self.point, "low": self.low, "high": self.high}


@dataclass
class EvalReport:
    """Scores of one evaluated session.

    Attributes:
        identification: Per-user identification counts (implicit REs)
        confusion: Raw label-kind to predicted-kind counts
        object_identification: Per-measure object scores, if selections given
        resolution: Resolution scores per mode
        intervals: Bootstrap CIs keyed by metric name
        recommendations: Human-readable notes on weak spots
    """

    identification: dict[str, PRF]
    confusion: dict[str, int]
    object_identification: ObjectIdentification | None = None
    resolution: dict[str, ResolutionScore] = field(default_factory=dict)
    intervals: dict[str, Interval] = field(default_factory=dict)
    recommendations: list[str] = field(default_factory=list)

    @property
    def improvement_points(self) -> float | None:
        baseline = self.resolution.get(ResolutionMode.BASELINE.value)
        system = self.resolution.get(ResolutionMode.SYSTEM.value)
        if baseline is None or system is None:
            return None
        return improvement_points(baseline, system)

    def add_recommendation(self, recommendation: str) -> None:
        self.recommendations.append(recommendation)

    def analyze(self) -> None:
        """Derive recommendations from the scores."""
        self.recommendations = []
        pooled = PRF()
        for counts in self.identification.values():
            pooled = pooled + counts
        if pooled.tp + pooled.fn and pooled.recall < LOW_RECALL:
            self.add_recommendation(
                f"Identification recall is {pooled.recall:.1%}; miss-identified REs "
                "propagate to resolution. Review the annotator backend."
            )
        gain = self.improvement_points
        if gain is not None and gain < 0:
            self.add_recommendation(
                f"System mode resolves {abs(gain):.1f} points fewer REs than baseline. "
                "Check window lead/lag and the measure hierarchy."
            )
        if self.object_identification is not None:
            none_share = (
                self.object_identification.overall.none / self.object_identification.scored
                if self.object_identification.scored
                else 0.0
            )
            if none_share > 0:
                self.add_recommendation(
                    f"No object was selected for {none_share:.1%} of implicit REs; "
                    "fixations may be missing around those sentences."
                )

    def to_dict(self) -> dict[str, Any]:
        self.analyze()
        doc: dict[str, Any] = {
            "matching_rule": MATCHING_RULE,
            "identification": {
                "per_user": {u: c.to_dict() for u, c in sorted(self.identification.items())},
                "confusion": self.confusion,
            },
        }
        if self.object_identification is not None:
            oi = self.object_identification
            doc["object_identification"] = {
                "scored": oi.scored,
                "per_measure": {m.value: oi.per_measure[m].to_dict() for m in Measure},
                "presence": {m.value: oi.presence(m) for m in Measure},
                "overall": oi.overall.to_dict(),
                "selection_frequency": {
                    m.value: {
                        "correct": oi.frequency[m].correct,
                        "incorrect": oi.frequency[m].incorrect,
                    }
                    for m in Measure
                },
                "per_user_modality": {
                    user: {mod.value: c.to_dict() for mod, c in counts.items()}
                    for user, counts in sorted(oi.per_user_modality.items())
                },
            }
        doc["resolution"] = {
            mode: _resolution_dict(score) for mode, score in sorted(self.resolution.items())
        }
        if self.improvement_points is not None:
            doc["improvement_points"] = self.improvement_points
        doc["intervals"] = {k: v.to_dict() for k, v in sorted(self.intervals.items())}
        doc["recommendations"] = self.recommendations
        return doc


def _resolution_dict(score: ResolutionScore) -> dict[str, Any]:
    return {
        "labelled_implicit": score.labelled,
        "counts": score.counts.to_dict(),
        "correct_rate": score.correct_rate,
        "missed_as_explicit": score.missed_as_explicit,
        "missed_absent": score.missed_absent,
        "spurious": score.spurious,
        "per_user": {u: c.to_dict() for u, c in sorted(score.per_user.items())},
        "per_user_correct_rate": dict(sorted(score.per_user_correct_rate.items())),
        "by_reference_type": {
            k: _category_dict(v) for k, v in sorted(score.by_reference_type.items())
        },
        "by_target_kind": {
            k: _category_dict(v) for k, v in sorted(score.by_target_kind.items())
        },
    }


def _category_dict(counts: CategoryCounts) -> dict[str, Any]:
    return {**counts.to_dict(), "prf": counts.prf.to_dict()}


def _category_key(category: str) -> str:
    return "" if category == "all" else "_" + category.replace(":", "_")


def _interval(
    values: Sequence[float], cfg: EvaluationConfig, seed: int, name: str
) -> Interval | None:
    if not values:
        return None
    point = sum(values) / len(values)
    try:
        low, high = bootstrap_ci(values, cfg.resamples, cfg.level, seed)
    except InsufficientData as e:
        logger.debug(f"No interval for {name}: {e}")
        return None
    low, high = widen_to_contain((low, high), point)
    return Interval(point, low, high)


def build_report(
    transcript: Transcript,
    labels: Sequence[GroundTruthLabel],
    predicted: Sequence[ReferringExpression],
    scene: SceneTable,
    selections: Sequence[SelectionResult] | None = None,
    resolutions: Mapping[ResolutionMode, Sequence[Resolution]] | None = None,
    cfg: EvaluationConfig | None = None,
    seed: int = 0,
) -> EvalReport:
    """Run every scorer and attach bootstrap intervals over users.

    Intervals are keyed by metric name, suffixed with the resolution category
    or measure they cover. Metrics with fewer than two contributing users get
    no interval.
    """
    cfg = cfg or EvaluationConfig()
    identification = score_identification(predicted, labels, transcript)
    report = EvalReport(
        identification=identification,
        confusion=identification_confusion(predicted, labels),
    )

    candidates: dict[str, list[float]] = {
        "identification_f1": [c.f1 for _, c in sorted(identification.items())],
    }
    if selections is not None:
        oi = score_object_identification(selections, labels, scene, transcript)
        report.object_identification = oi
        for modality, name in ((Modality.POINTER, "pointing"), (Modality.GAZE, "gazing")):
            candidates[f"object_precision_{name}"] = [
                counts[modality].precision
                for _, counts in sorted(oi.per_user_modality.items())
                if counts[modality].correct + counts[modality].incorrect
            ]
        for measure in Measure:
            candidates[f"object_precision_{measure.value}"] = [
                counts[measure].precision
                for _, counts in sorted(oi.per_user_measure.items())
                if counts[measure].correct + counts[measure].incorrect
            ]
    for mode, items in sorted((resolutions or {}).items(), key=lambda kv: kv[0].value):
        score = score_resolution(items, labels, predicted, transcript, mode.value)
        report.resolution[mode.value] = score
        candidates[f"resolution_f1_{mode.value}"] = [
            c.f1 for _, c in sorted(score.per_user.items())
        ]
        candidates[f"resolution_correct_rate_{mode.value}"] = [
            rate for _, rate in sorted(score.per_user_correct_rate.items())
        ]
        for category, per_user in sorted(score.per_user_categories.items()):
            key = _category_key(category)
            outcomes = [c for _, c in sorted(per_user.items())]
            candidates[f"resolution_f1_{mode.value}{key}"] = [c.prf.f1 for c in outcomes]
            candidates[f"resolution_correct_rate_{mode.value}{key}"] = [
                c.correct / c.total for c in outcomes
            ]

    for name, values in candidates.items():
        interval = _interval(values, cfg, seed, name)
        if interval is not None:
            report.intervals[name] = interval
    report.analyze()
    return report


def _write_csv(path: Path, header: list[str], rows: list[list[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _pct(part: int, whole: int) -> float:
    return round(PERCENT * part / whole, 3) if whole else 0.0


def _bounds(interval: Interval | None) -> list[Any]:
    return ["", ""] if interval is None else [interval.low, interval.high]


def _measure_row(name: str, c: MeasureCounts, interval: Interval | None) -> list[Any]:
    return [
        name,
        c.correct,
        c.incorrect,
        c.none,
        _pct(c.correct, c.total),
        _pct(c.incorrect, c.total),
        _pct(c.none, c.total),
        c.precision,
        *_bounds(interval),
    ]


def write_report(report: EvalReport, out_dir: str | Path) -> Path:
    """Write report.json plus the CSV tables under report/.

    Returns:
        Path: Location of report.json
    """
    root = Path(out_dir)
    tables = root / "report"
    tables.mkdir(parents=True, exist_ok=True)
    path = root / "report.json"
    write_json(path, report.to_dict())

    _write_csv(
        tables / "identification.csv",
        ["user", "tp", "fp", "fn", "precision", "recall", "f1"],
        [
            [u, c.tp, c.fp, c.fn, c.precision, c.recall, c.f1]
            for u, c in sorted(report.identification.items())
        ],
    )
    oi = report.object_identification
    if oi is not None:
        _write_csv(
            tables / "object_identification.csv",
            ["measure", "correct", "incorrect", "none", "correct_pct",
             "incorrect_pct", "none_pct", "precision", "precision_low", "precision_high"],
            [
                _measure_row(
                    m.value,
                    oi.per_measure[m],
                    report.intervals.get(f"object_precision_{m.value}"),
                )
                for m in Measure
            ],
        )
        chosen = oi.overall.correct + oi.overall.incorrect
        _write_csv(
            tables / "selection_frequency.csv",
            ["measure", "correct", "incorrect", "share_pct"],
            [
                [
                    m.value,
                    oi.frequency[m].correct,
                    oi.frequency[m].incorrect,
                    _pct(oi.frequency[m].correct + oi.frequency[m].incorrect, chosen),
                ]
                for m in Measure
            ],
        )
    rows: list[list[Any]] = []
    for mode, score in sorted(report.resolution.items()):
        for category, counts in score.categories():
            prf = score.pooled if category == "all" else counts.prf
            f1_interval = report.intervals.get(f"resolution_f1_{mode}{_category_key(category)}")
            rows.append(
                [
                    mode,
                    category,
                    counts.correct,
                    counts.incorrect,
                    counts.miss_identified,
                    counts.total,
                    _pct(counts.correct, counts.total),
                    prf.precision,
                    prf.recall,
                    prf.f1,
                    *_bounds(f1_interval),
                ]
            )
    _write_csv(
        tables / "resolution.csv",
        ["mode", "category", "correct", "incorrect", "miss_identified", "total",
         "correct_pct", "precision", "recall", "f1", "f1_low", "f1_high"],
        rows,
    )
    logger.info(f"Wrote evaluation report to {path}")
    return path
