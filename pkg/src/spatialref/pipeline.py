"""Stage orchestration over an output directory.

Every stage reads its inputs from the artifacts earlier stages wrote and
writes its own artifact at the end, so running stages one at a time from a
saved output directory gives the same files as a single ``pipeline`` run::

    <out>/config.json         effective configuration
    <out>/fixations/*.jsonl   one file per (user, modality) stream
    <out>/res.json            annotated transcript
    <out>/selections.jsonl    per-RE selection trace
    <out>/plain.txt, augmented.txt, augmented.json
    <out>/resolutions.json    {"baseline": [...], "system": [...], "token_stats": {...}}
    <out>/report.json, report/*.csv
"""

from __future__ import annotations

from pathlib import Path

from .annotation import (
    ReferringExpression,
    identify_spatial_res,
    implicit_only,
    read_annotations,
    write_annotations,
)
from .augment import (
    augment_transcript,
    check_token_budget,
    read_renderings,
    write_augmented,
)
from .backends import BackendSettings, get_annotator, get_resolver
from .config import PipelineConfig
from .coref import (
    UNRESOLVED,
    ResolutionMode,
    read_resolutions,
    resolve_all,
    token_stats,
    write_resolutions,
)
from .evaluation import load_labels
from .exceptions import MissingFile
from .fixations import Fixation, detect_all, read_fixations, write_fixations
from .log_config import get_logger
from .monitoring import PipelineMonitor
from .report import EvalReport, build_report, write_report
from .selection import SelectionResult, read_selections, select_all, write_selections
from .session import SessionBundle, StreamKey, load_bundle
from .utils import write_json

logger = get_logger(__name__)

FIXATIONS_DIR = "fixations"
RES_FILE = "res.json"
SELECTIONS_FILE = "selections.jsonl"
AUGMENTED_FILE = "augmented.json"
RESOLUTIONS_FILE = "resolutions.json"
CONFIG_FILE = "config.json"
LABELS_FILE = "labels.json"


class Pipeline:
    """Run pipeline stages for one bundle into one output directory.

    Attributes:
        current_stage: Name of the stage running (or last run), for error context
        monitor: Per-stage statistics
    """

    def __init__(
        self,
        bundle_path: str | Path,
        out_dir: str | Path,
        config: PipelineConfig,
        show_progress: bool = False,
    ) -> None:
        self.bundle_path = Path(bundle_path)
        self.out_dir = Path(out_dir)
        self.config = config
        self.show_progress = show_progress
        self.monitor = PipelineMonitor()
        self.current_stage = "ingest"
        self._bundle: SessionBundle | None = None

    # -- inputs --------------------------------------------------------------

    @property
    def bundle(self) -> SessionBundle:
        if self._bundle is None:
            self._bundle = load_bundle(self.bundle_path, rate_hz=self.config.rate_hz)
        return self._bundle

    def _settings(self) -> BackendSettings:
        return BackendSettings(scene=self.bundle.scene, remote=self.config.remote)

    def _workers(self, mode: str) -> int:
        return 1 if mode == "rule" else self.config.remote.max_in_flight

    def _artifact(self, name: str) -> Path:
        path = self.out_dir / name
        if not path.exists():
            raise MissingFile(path, f"artifact of an earlier stage ({name})")
        return path

    def _prepare(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        write_json(self.out_dir / CONFIG_FILE, self.config.to_dict())

    def _fixations(self) -> dict[StreamKey, list[Fixation]]:
        return read_fixations(self._artifact(FIXATIONS_DIR))

    def _expressions(self) -> list[ReferringExpression]:
        return read_annotations(self._artifact(RES_FILE))

    # -- stages --------------------------------------------------------------

    def ingest(self) -> SessionBundle:
        """Load and validate the bundle."""
        self.current_stage = "ingest"
        with self.monitor.stage("ingest") as stats:
            bundle = self.bundle
            stats.processed = sum(len(s.samples) for s in bundle.streams.values())
        return bundle

    def fixations(self) -> dict[StreamKey, list[Fixation]]:
        self.current_stage = "fixations"
        self._prepare()
        with self.monitor.stage("fixations") as stats:
            detected = detect_all(self.bundle, self.config.idt)
            write_fixations(self.out_dir / FIXATIONS_DIR, detected)
            stats.processed = sum(len(items) for items in detected.values())
        return detected

    def annotate(self) -> list[ReferringExpression]:
        self.current_stage = "annotate"
        self._prepare()
        mode = self.config.backends.annotator
        with self.monitor.stage("annotate") as stats:
            backend = get_annotator(mode, self._settings())
            expressions = identify_spatial_res(
                self.bundle.transcript,
                backend,
                max_workers=self._workers(mode),
                errors=stats.errors,
            )
            write_annotations(self.out_dir / RES_FILE, self.bundle.transcript, expressions)
            stats.processed = len(expressions)
            stats.skipped = len(stats.errors)
        return expressions

    def select(self) -> list[SelectionResult]:
        self.current_stage = "select"
        self._prepare()
        with self.monitor.stage("select") as stats:
            results = select_all(
                implicit_only(self._expressions()),
                self.bundle,
                self._fixations(),
                self.config.selection,
                show_progress=self.show_progress,
            )
            write_selections(self.out_dir / SELECTIONS_FILE, results)
            stats.processed = len(results)
            stats.skipped = sum(1 for r in results if r.object_id is None)
        return results

    def augment(self) -> None:
        self.current_stage = "augment"
        self._prepare()
        with self.monitor.stage("augment") as stats:
            selections = read_selections(self._artifact(SELECTIONS_FILE))
            augmented = augment_transcript(
                self.bundle.transcript, selections, self.bundle.scene
            )
            _, rendered = write_augmented(self.out_dir, augmented)
            check_token_budget(rendered, self.config.augment.token_budget)
            stats.processed = sum(len(a.annotations) for a in augmented)

    def resolve(self, mode: ResolutionMode | str) -> None:
        mode = ResolutionMode(mode)
        self.current_stage = f"resolve ({mode.value})"
        self._prepare()
        backend_mode = self.config.backends.resolver
        with self.monitor.stage(self.current_stage) as stats:
            expressions = implicit_only(self._expressions())
            plain, augmented = read_renderings(self._artifact(AUGMENTED_FILE))
            annotated = {
                s.re_id
                for s in read_selections(self._artifact(SELECTIONS_FILE))
                if s.selected
            }
            backend = get_resolver(backend_mode, self._settings())
            resolutions = resolve_all(
                expressions,
                plain,
                augmented,
                backend,
                mode,
                max_workers=self._workers(backend_mode),
                show_progress=self.show_progress,
                annotated=annotated,
                errors=stats.errors,
            )
            rendering = plain if mode is ResolutionMode.BASELINE else augmented
            write_resolutions(
                self.out_dir / RESOLUTIONS_FILE,
                mode,
                resolutions,
                token_stats(expressions, rendering),
            )
            stats.processed = len(resolutions)
            stats.skipped = sum(1 for r in resolutions if r.referent_text == UNRESOLVED)

    def evaluate(self, labels_path: str | Path | None = None) -> EvalReport:
        self.current_stage = "evaluate"
        self._prepare()
        with self.monitor.stage("evaluate") as stats:
            transcript = self.bundle.transcript
            labels = load_labels(labels_path or self.bundle_path / LABELS_FILE, transcript)
            predicted = self._expressions()
            selections_path = self.out_dir / SELECTIONS_FILE
            selections = read_selections(selections_path) if selections_path.exists() else None
            stored = read_resolutions(self.out_dir / RESOLUTIONS_FILE)
            implicit = implicit_only(predicted)
            resolutions = {
                mode: items for mode, items in stored.items() if items or not implicit
            }
            report = build_report(
                transcript,
                labels,
                predicted,
                self.bundle.scene,
                selections=selections,
                resolutions=resolutions,
                cfg=self.config.evaluation,
                seed=self.config.seed,
            )
            write_report(report, self.out_dir)
            stats.processed = len(labels)
        return report

    def run_all(self, labels_path: str | Path | None = None) -> EvalReport | None:
        """Run every stage in order; evaluation runs when labels exist."""
        self.ingest()
        self.fixations()
        self.annotate()
        self.select()
        self.augment()
        self.resolve(ResolutionMode.BASELINE)
        self.resolve(ResolutionMode.SYSTEM)
        labels = Path(labels_path) if labels_path else self.bundle_path / LABELS_FILE
        if not labels.exists():
            logger.info(f"No labels at {labels}; skipping evaluation")
            return None
        return self.evaluate(labels)
