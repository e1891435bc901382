"""Test report aggregation and table output."""

import csv
import json
from pathlib import Path

import pytest

from spatialref.annotation import ReferenceType, ReferringExpression, REKind
from spatialref.config import EvaluationConfig, PipelineConfig
from spatialref.coref import Resolution, ResolutionMode
from spatialref.evaluation import PRF, CategoryCounts, GroundTruthLabel, ResolutionScore
from spatialref.metrics import Measure, ObjectScore
from spatialref.pipeline import Pipeline
from spatialref.report import EvalReport, build_report, write_report
from spatialref.selection import SelectionResult

IT = (7, 9)
# sentences whose RE resolves to the labelled sofa; the rest say "lamp"
RESOLVED_SOFA = (0, 1, 2, 4)
# sentences whose individual-gazing winner is the lamp
GAZED_LAMP = (5, 6, 7)


@pytest.fixture
def cabinets_report(tmp_path: Path, cabinets_bundle):
    out = tmp_path / "out"
    report = Pipeline(cabinets_bundle, out, PipelineConfig()).run_all()
    return report, out


def _rows(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _score(mode, correct, total):
    return ResolutionScore(mode=mode, counts=CategoryCounts(correct, total - correct, 0))


def test_identification_and_object_scores(cabinets_report):
    report, _ = cabinets_report
    assert {u: (c.tp, c.fp, c.fn) for u, c in report.identification.items()} == {
        "u7": (2, 0, 0),
        "u8": (1, 0, 0),
    }
    oi = report.object_identification
    assert oi.scored == 3
    assert (oi.overall.correct, oi.overall.incorrect, oi.overall.none) == (2, 1, 0)
    assert oi.frequency[Measure.CONCURRENT_GAZING].correct == 1
    assert oi.frequency[Measure.INDIVIDUAL_GAZING].to_dict()["incorrect"] == 1


def test_resolution_categories(cabinets_report):
    report, _ = cabinets_report
    system = report.resolution["system"]
    assert system.counts.to_dict() == {
        "correct": 2,
        "incorrect": 1,
        "miss_identified": 0,
        "total": 3,
    }
    assert system.by_target_kind["place"].correct == 1
    assert system.by_reference_type["endophora"].correct == 1


def test_intervals_contain_point_estimates(cabinets_report):
    report, _ = cabinets_report
    assert "identification_f1" in report.intervals
    for interval in report.intervals.values():
        assert interval.low <= interval.point <= interval.high
    assert report.intervals["identification_f1"].to_dict() == {
        "point": 1.0,
        "low": 1.0,
        "high": 1.0,
    }


def test_report_files(cabinets_report):
    _, out = cabinets_report
    doc = json.loads((out / "report.json").read_text())
    assert doc["matching_rule"].startswith("A resolved referent is correct")
    assert doc["improvement_points"] == pytest.approx(100.0 / 3)
    assert set(doc["resolution"]) == {"baseline", "system"}

    measures = _rows(out / "report" / "object_identification.csv")
    assert [row["measure"] for row in measures] == [m.value for m in Measure]
    gazing = next(r for r in measures if r["measure"] == "individual-gazing")
    assert int(gazing["correct"]) + int(gazing["incorrect"]) + int(gazing["none"]) == 3

    resolution = _rows(out / "report" / "resolution.csv")
    overall = [r for r in resolution if r["category"] == "all"]
    assert [(r["mode"], r["correct"], r["total"]) for r in overall] == [
        ("baseline", "1", "3"),
        ("system", "2", "3"),
    ]
    identification = _rows(out / "report" / "identification.csv")
    assert [r["user"] for r in identification] == ["u7", "u8"]


def test_recommendations():
    report = EvalReport(
        identification={"u7": PRF(tp=1, fn=3), "u8": PRF(tp=2)},
        confusion={},
        resolution={"baseline": _score("baseline", 3, 4), "system": _score("system", 2, 4)},
    )
    report.analyze()
    assert report.improvement_points == pytest.approx(-25.0)
    assert len(report.recommendations) == 2
    assert "recall is 50.0%" in report.recommendations[0]
    assert "25.0 points fewer" in report.recommendations[1]


def test_no_recommendations_for_clean_run():
    report = EvalReport(identification={"u7": PRF(tp=4)}, confusion={})
    report.analyze()
    assert report.recommendations == []
    assert report.improvement_points is None


def test_write_report_without_selections(tmp_path: Path):
    report = EvalReport(identification={"u7": PRF(tp=1)}, confusion={"implicit->implicit": 1})
    path = write_report(report, tmp_path)
    assert path == tmp_path / "report.json"
    assert not (tmp_path / "report" / "object_identification.csv").exists()
    assert _rows(tmp_path / "report" / "resolution.csv") == []
    assert "object_identification" not in json.loads(path.read_text())


def test_evaluation_config_defaults():
    cfg = EvaluationConfig()
    assert (cfg.resamples, cfg.level) == (1000, 0.95)


@pytest.fixture
def split_report(scene, make_transcript):
    """Eight "it" REs: 0-3 exophora, 4-7 endophora, u7 speaks the even ones."""
    transcript = make_transcript(
        *[("u7" if i % 2 == 0 else "u8", "I like it!", 2.0 * i, 2.0 * i + 1.0)
          for i in range(8)]
    )
    labels = [
        GroundTruthLabel(
            re_id=f"label-{i}",
            sentence_index=i,
            span=IT,
            text="it",
            kind=REKind.IMPLICIT,
            reference_type=ReferenceType.EXOPHORA if i < 4 else ReferenceType.ENDOPHORA,
            referent_text="sofa",
            geometry_id="sofa",
        )
        for i in range(8)
    ]
    predicted = [
        ReferringExpression(f"re-{i:04d}-0007", i, IT, "it", REKind.IMPLICIT) for i in range(8)
    ]
    gazing = Measure.INDIVIDUAL_GAZING
    pointing = Measure.CONCURRENT_POINTING
    selections = []
    for i, expression in enumerate(predicted):
        target = "lamp" if i in GAZED_LAMP else "sofa"
        scores = {gazing: [ObjectScore(target, gazing, 1.0, 1.0)]}
        if i == 0:
            scores[pointing] = [ObjectScore("sofa", pointing, 1.0, 1.0)]
        selections.append(
            SelectionResult(expression.id, i, IT, transcript[i].speaker, target, gazing, scores)
        )
    resolutions = [
        Resolution(p.id, ResolutionMode.SYSTEM, "sofa" if i in RESOLVED_SOFA else "lamp")
        for i, p in enumerate(predicted)
    ]
    return build_report(
        transcript, labels, predicted, scene, selections, {ResolutionMode.SYSTEM: resolutions}
    )


def test_category_prf(split_report):
    system = split_report.resolution["system"]
    exophora = system.by_reference_type["exophora"].prf
    assert (exophora.tp, exophora.fp, exophora.fn) == (3, 1, 1)
    assert exophora.f1 == pytest.approx(0.75)
    endophora = system.by_reference_type["endophora"].prf
    assert (endophora.tp, endophora.fp, endophora.fn) == (1, 3, 3)
    assert system.by_target_kind["object"].prf.recall == pytest.approx(0.5)
    assert set(system.per_user_categories) == {
        "reference_type:endophora",
        "reference_type:exophora",
        "target_kind:object",
    }


@pytest.mark.parametrize(
    "name,point",
    [
        # u7 resolves both exophora, u8 one of two
        ("resolution_f1_system_reference_type_exophora", 0.75),
        ("resolution_correct_rate_system_reference_type_exophora", 0.75),
        # u7 one of two endophora, u8 none
        ("resolution_f1_system_reference_type_endophora", 0.25),
        ("resolution_f1_system_target_kind_object", 0.5),
        # u7 3 of 4 gazed objects right, u8 2 of 4
        ("object_precision_individual-gazing", 0.625),
    ],
)
def test_category_and_measure_intervals(split_report, name, point):
    interval = split_report.intervals[name]
    assert interval.point == pytest.approx(point)
    assert 0.0 <= interval.low <= interval.point <= interval.high <= 1.0


def test_single_user_metrics_get_no_interval(split_report):
    # concurrent pointing only scored an object for u7
    assert "object_precision_concurrent-pointing" not in split_report.intervals
    assert "object_precision_gazing" in split_report.intervals


def test_category_intervals_in_report_files(tmp_path: Path, split_report):
    path = write_report(split_report, tmp_path)
    doc = json.loads(path.read_text())
    exophora = doc["resolution"]["system"]["by_reference_type"]["exophora"]
    assert exophora["correct"] == 3
    assert exophora["prf"]["f1"] == pytest.approx(0.75)
    assert "resolution_f1_system_reference_type_exophora" in doc["intervals"]

    resolution = {r["category"]: r for r in _rows(tmp_path / "report" / "resolution.csv")}
    row = resolution["reference_type:exophora"]
    assert float(row["f1"]) == pytest.approx(0.75)
    interval = split_report.intervals["resolution_f1_system_reference_type_exophora"]
    assert float(row["f1_low"]) == pytest.approx(interval.low)
    assert float(row["f1_high"]) == pytest.approx(interval.high)

    measures = {r["measure"]: r for r in _rows(tmp_path / "report" / "object_identification.csv")}
    assert float(measures["individual-gazing"]["precision_low"]) <= 0.625
    assert measures["concurrent-pointing"]["precision_low"] == ""
