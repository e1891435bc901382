"""Object-attributed fixation detection (dispersion-threshold identification).

The classic I-DT window test runs on ray directions, and the stream is first
cut into runs wherever the hit object changes, the ray hits nothing, a sample
is low-confidence, the laser is released, or a frame gap exceeds
``gap_factor`` sample periods. A window that already meets the duration
threshold when its run ends is emitted; a shorter one is dropped.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from .exceptions import ConfigError, SchemaViolation, ZeroVector
from .log_config import get_logger
from .session import AttentionStream, Modality, SessionBundle, StreamKey, Vector
from .utils import read_jsonl, write_jsonl

logger = get_logger(__name__)

# Mean direction norms below this have no usable centroid
ZERO_NORM = 1e-12
# Slack for comparing float durations against the threshold
DURATION_EPS = 1e-9
MAX_DISPERSION_DEG = 90.0

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True)
class IdtParams:
    """Thresholds for dispersion-threshold fixation identification.

    Attributes:
        dispersion_deg: Max angle between any member ray and the mean ray
        min_duration_s: Minimum fixation duration
        min_confidence: Samples below this confidence break windows
        gap_factor: Inter-sample gaps above this many sample periods break windows
    """

    dispersion_deg: float = 0.5
    min_duration_s: float = 0.1
    min_confidence: float = 0.5
    gap_factor: float = 3.0

    def validate(self) -> None:
        if not 0.0 < self.dispersion_deg < MAX_DISPERSION_DEG:
            raise ConfigError(
                f"dispersion_deg must be in (0, 90), got {self.dispersion_deg}"
            )
        if self.min_duration_s <= 0:
            raise ConfigError(f"min_duration_s must be > 0, got {self.min_duration_s}")
        if not 0.0 < self.min_confidence <= 1.0:
            raise ConfigError(
                f"min_confidence must be in (0, 1], got {self.min_confidence}"
            )
        if self.gap_factor <= 0:
            raise ConfigError(f"gap_factor must be > 0, got {self.gap_factor}")

    def to_dict(self) -> dict[str, float]:
        return {
            "dispersion_deg": self.dispersion_deg,
            "min_duration_s": self.min_duration_s,
            "min_confidence": self.min_confidence,
            "gap_factor": self.gap_factor,
        }


@dataclass(frozen=True)
class Fixation:
    """A dwell of one user's gaze or pointer on one object."""

    user: str
    modality: Modality
    object_id: str
    start: float
    end: float
    centroid_dir: Vector

    @property
    def duration(self) -> float:
        return self.end - self.start

    def to_record(self) -> dict[str, Any]:
        return {
            "user": self.user,
            "modality": self.modality.value,
            "object_id": self.object_id,
            "start": self.start,
            "end": self.end,
            "centroid_dir": list(self.centroid_dir),
        }

    @classmethod
    def from_record(cls, doc: dict[str, Any]) -> Fixation:
        return cls(
            user=doc["user"],
            modality=Modality(doc["modality"]),
            object_id=doc["object_id"],
            start=float(doc["start"]),
            end=float(doc["end"]),
            centroid_dir=tuple(float(v) for v in doc["centroid_dir"]),  # type: ignore[arg-type]
        )


def _mean_direction(dirs: FloatArray) -> FloatArray | None:
    mean = dirs.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < ZERO_NORM:
        return None
    result: FloatArray = mean / norm
    return result


def _max_deviation_deg(dirs: FloatArray, mean: FloatArray) -> float:
    # atan2 keeps precision for tiny angles where arccos(dot) does not
    cross = np.linalg.norm(np.cross(dirs, mean), axis=1)
    dot = dirs @ mean
    return float(np.degrees(np.arctan2(cross, dot)).max())


def angular_dispersion(dirs: Sequence[Sequence[float]] | FloatArray) -> float:
    """Maximum angle (degrees) between any direction and their normalized mean.

    Raises:
        ValueError: If dirs is empty
        ZeroVector: If the mean direction has near-zero norm
    """
    arr = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    if arr.shape[0] == 0:
        raise ValueError("angular_dispersion needs at least one direction")
    mean = _mean_direction(arr)
    if mean is None:
        raise ZeroVector("Mean direction has near-zero norm")
    return _max_deviation_deg(arr, mean)


def _window_dispersion(dirs: FloatArray) -> float:
    mean = _mean_direction(dirs)
    if mean is None:
        return float("inf")
    return _max_deviation_deg(dirs, mean)


def _usable_runs(
    stream: AttentionStream, params: IdtParams
) -> Iterator[tuple[str, list[int]]]:
    """Yield (object_id, sample indices) for each unbroken same-object run."""
    max_gap = params.gap_factor * stream.period
    run: list[int] = []
    run_object: str | None = None
    previous_t = 0.0
    for i, sample in enumerate(stream.samples):
        usable = (
            sample.object_id is not None
            and sample.confidence >= params.min_confidence
            and (stream.modality is Modality.GAZE or sample.active)
        )
        if not usable:
            if run and run_object is not None:
                yield run_object, run
            run, run_object = [], None
            continue
        if run and (
            sample.object_id != run_object or sample.t - previous_t > max_gap
        ):
            if run_object is not None:
                yield run_object, run
            run = []
        run.append(i)
        run_object = sample.object_id
        previous_t = sample.t
    if run and run_object is not None:
        yield run_object, run


def _idt_windows(
    times: FloatArray, dirs: FloatArray, params: IdtParams
) -> Iterator[tuple[int, int]]:
    """Classic I-DT over one run; yields inclusive (first, last) indices."""
    n = len(times)
    i = 0
    while i < n:
        j = int(
            np.searchsorted(
                times, times[i] + params.min_duration_s - DURATION_EPS, side="left"
            )
        )
        if j >= n:
            return
        if _window_dispersion(dirs[i : j + 1]) <= params.dispersion_deg:
            while (
                j + 1 < n
                and _window_dispersion(dirs[i : j + 2]) <= params.dispersion_deg
            ):
                j += 1
            yield i, j
            i = j + 1
        else:
            i += 1


def detect_fixations(stream: AttentionStream, params: IdtParams) -> list[Fixation]:
    """Detect object-attributed fixations in one attention stream.

    Args:
        stream: Time-ordered gaze or pointer samples
        params: I-DT thresholds

    Returns:
        list[Fixation]: Non-overlapping fixations ordered by start time
    """
    fixations: list[Fixation] = []
    for object_id, indices in _usable_runs(stream, params):
        samples = [stream.samples[k] for k in indices]
        times = np.fromiter((s.t for s in samples), dtype=np.float64, count=len(samples))
        raw = np.array([s.direction for s in samples], dtype=np.float64)
        dirs = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        for first, last in _idt_windows(times, dirs, params):
            centroid = _mean_direction(dirs[first : last + 1])
            if centroid is None:
                continue
            fixations.append(
                Fixation(
                    user=stream.user,
                    modality=stream.modality,
                    object_id=object_id,
                    start=float(times[first]),
                    end=float(times[last]),
                    centroid_dir=(
                        float(centroid[0]),
                        float(centroid[1]),
                        float(centroid[2]),
                    ),
                )
            )
    return fixations


FixationIndex = Mapping[StreamKey, list[Fixation]]


def detect_all(bundle: SessionBundle, params: IdtParams) -> dict[StreamKey, list[Fixation]]:
    """Run the detector on every stream of a bundle."""
    params.validate()
    result: dict[StreamKey, list[Fixation]] = {}
    for key in sorted(bundle.streams, key=lambda k: (k[0], k[1].value)):
        stream = bundle.streams[key]
        result[key] = detect_fixations(stream, params)
        logger.info(
            f"{key[0]}/{key[1].value}: {len(result[key])} fixations "
            f"from {len(stream.samples)} samples"
        )
    return result


def total_duration(fixations: Sequence[Fixation]) -> float:
    return sum(f.duration for f in fixations)


def fixation_file_name(user: str, modality: Modality) -> str:
    return f"{user}_{modality.value}.jsonl"


def write_fixations(out_dir: str | Path, fixations: FixationIndex) -> list[Path]:
    """Dump fixations as one JSONL file per stream."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for (user, modality), items in sorted(
        fixations.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
    ):
        path = root / fixation_file_name(user, modality)
        write_jsonl(path, (f.to_record() for f in items))
        paths.append(path)
    return paths


def read_fixations(in_dir: str | Path) -> dict[StreamKey, list[Fixation]]:
    """Load a fixation dump written by write_fixations."""
    result: dict[StreamKey, list[Fixation]] = {}
    for path in sorted(Path(in_dir).glob("*.jsonl")):
        items: list[Fixation] = []
        for line_no, doc in read_jsonl(path):
            try:
                items.append(Fixation.from_record(doc))
            except (KeyError, ValueError, TypeError) as e:
                raise SchemaViolation(f"Bad fixation record: {e}", path, line_no) from e
        user, _, modality = path.stem.rpartition("_")
        result[(user, Modality(modality))] = items
    return result
