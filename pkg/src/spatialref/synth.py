"""Scripted synthetic sessions with known fixations, transcript and labels.

A script (``fixtures/<id>/script.json``) lists scene objects with anchor
positions, fixation intervals per user and modality, timed sentences and
ground-truth labels. Generation realizes each fixation as 120 Hz rays toward
the object's anchor with angular jitter drawn uniformly from a disc, so the
detector recovers the scripted intervals to within one sample period. Outside
fixations the gaze ray hits nothing and the pointer is released.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .evaluation import GroundTruthLabel, parse_label
from .exceptions import InconsistentScript, ValidationError
from .fixations import IdtParams
from .log_config import get_logger
from .session import (
    DEFAULT_RATE_HZ,
    PARTICIPANTS_PER_SESSION,
    AttentionSample,
    AttentionStream,
    Modality,
    SceneObject,
    SceneTable,
    Sentence,
    SessionBundle,
    StreamKey,
    Vector,
    merge_transcripts,
    write_bundle,
)
from .utils import read_json, write_json

logger = get_logger(__name__)

GAZE_ORIGIN: Vector = (0.0, 1.6, 0.0)
HAND_ORIGIN: Vector = (0.2, 1.2, 0.3)
# Rays outside fixations point at the ceiling, where no object lives
IDLE_DIRECTION: Vector = (0.0, 1.0, 0.0)
IDLE_DISTANCE = 2.0
COORD_DECIMALS = 6


@dataclass(frozen=True)
class ScriptedFixation:
    user: str
    modality: Modality
    object_id: str
    start: float
    end: float


@dataclass(frozen=True)
class ScriptedSentence:
    speaker: str
    start: float
    end: float
    text: str


@dataclass(frozen=True)
class SynthScript:
    """A self-consistent session description."""

    fixture_id: str
    participants: tuple[str, str]
    start: float
    end: float
    objects: tuple[SceneObject, ...]
    positions: dict[str, Vector]
    fixations: tuple[ScriptedFixation, ...]
    sentences: tuple[ScriptedSentence, ...]
    labels: tuple[dict[str, Any], ...] = ()
    rate_hz: float = DEFAULT_RATE_HZ
    description: str = ""
    provenance: str = "synthetic"
    expected: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> SynthScript:
        """Parse a script document.

        Raises:
            InconsistentScript: If fields are missing or of the wrong type
        """
        try:
            participants = tuple(doc["participants"])
            if len(participants) != PARTICIPANTS_PER_SESSION:
                raise InconsistentScript(
                    f"Script needs exactly two participants, got {list(participants)}"
                )
            return cls(
                fixture_id=str(doc["fixture_id"]),
                participants=(str(participants[0]), str(participants[1])),
                start=float(doc["start"]),
                end=float(doc["end"]),
                objects=tuple(
                    SceneObject(o["id"], o["name"], o.get("parent_id"))
                    for o in doc["objects"]
                ),
                positions={
                    o["id"]: tuple(float(v) for v in o["position"])  # type: ignore[misc]
                    for o in doc["objects"]
                    if "position" in o
                },
                fixations=tuple(
                    ScriptedFixation(
                        f["user"],
                        Modality(f["modality"]),
                        f["object_id"],
                        float(f["start"]),
                        float(f["end"]),
                    )
                    for f in doc.get("fixations", [])
                ),
                sentences=tuple(
                    ScriptedSentence(
                        s["speaker"], float(s["start"]), float(s["end"]), s["text"]
                    )
                    for s in doc.get("sentences", [])
                ),
                labels=tuple(doc.get("labels", [])),
                rate_hz=float(doc.get("rate_hz", DEFAULT_RATE_HZ)),
                description=doc.get("description", ""),
                provenance=doc.get("provenance", "synthetic"),
                expected=dict(doc.get("expected", {})),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InconsistentScript(f"Malformed script: {e!r}") from e


@dataclass(frozen=True)
class NoiseParams:
    """Angular jitter of synthetic rays, in degrees (uniform over a disc)."""

    jitter_deg: float = 0.1


@dataclass(frozen=True)
class SyntheticSession:
    bundle: SessionBundle
    labels: list[GroundTruthLabel]


def load_script(path: str | Path) -> SynthScript:
    return SynthScript.from_dict(read_json(path))


def _check_script(script: SynthScript, noise: NoiseParams, idt: IdtParams) -> None:
    if len(set(script.participants)) != PARTICIPANTS_PER_SESSION:
        raise InconsistentScript("Participants must be distinct")
    if not script.start < script.end:
        raise InconsistentScript(f"Script start {script.start} not before end {script.end}")
    if script.rate_hz <= 0:
        raise InconsistentScript("rate_hz must be positive")
    if noise.jitter_deg < 0 or 2 * noise.jitter_deg >= idt.dispersion_deg:
        raise InconsistentScript(
            f"Jitter {noise.jitter_deg} deg must be below half the dispersion "
            f"threshold {idt.dispersion_deg} deg"
        )
    ids = [o.id for o in script.objects]
    if len(set(ids)) != len(ids):
        raise InconsistentScript("Duplicate object ids")
    for obj in script.objects:
        if obj.parent_id is not None and obj.parent_id not in ids:
            raise InconsistentScript(f"{obj.id} has unknown parent {obj.parent_id}")

    by_stream: dict[StreamKey, list[ScriptedFixation]] = {}
    for fix in script.fixations:
        if fix.user not in script.participants:
            raise InconsistentScript(f"Fixation for unknown user {fix.user}")
        if fix.object_id not in script.positions:
            raise InconsistentScript(f"Fixation on {fix.object_id}, which has no position")
        if not script.start <= fix.start < fix.end <= script.end:
            raise InconsistentScript(
                f"Fixation {fix.user}/{fix.object_id} [{fix.start}, {fix.end}] "
                "is empty or outside the script"
            )
        by_stream.setdefault((fix.user, fix.modality), []).append(fix)
    for (user, modality), items in by_stream.items():
        items.sort(key=lambda f: f.start)
        for prev, nxt in zip(items, items[1:], strict=False):
            if nxt.start <= prev.end:
                raise InconsistentScript(
                    f"Overlapping {modality.value} fixations for {user} at {nxt.start}"
                )

    previous_start = -math.inf
    for sentence in script.sentences:
        if sentence.speaker not in script.participants:
            raise InconsistentScript(f"Sentence by unknown speaker {sentence.speaker}")
        if not script.start <= sentence.start < sentence.end <= script.end:
            raise InconsistentScript(f"Sentence {sentence.text!r} has bad times")
        if sentence.start < previous_start:
            raise InconsistentScript("Sentences must be listed in start-time order")
        previous_start = sentence.start


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _jitter(direction: np.ndarray, jitter_rad: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate direction by an angle drawn uniformly from a disc of radius jitter_rad."""
    if jitter_rad == 0:
        return direction
    helper = np.array([1.0, 0.0, 0.0]) if abs(direction[0]) < 0.9 else np.array([0.0, 1.0, 0.0])  # noqa: PLR2004
    u = _unit(np.cross(direction, helper))
    v = np.cross(direction, u)
    radius = jitter_rad * math.sqrt(rng.random())
    theta = 2 * math.pi * rng.random()
    return _unit(
        math.cos(radius) * direction
        + math.sin(radius) * (math.cos(theta) * u + math.sin(theta) * v)
    )


def _vec(values: np.ndarray) -> Vector:
    return (
        round(float(values[0]), COORD_DECIMALS),
        round(float(values[1]), COORD_DECIMALS),
        round(float(values[2]), COORD_DECIMALS),
    )


def _stream(
    script: SynthScript,
    user: str,
    modality: Modality,
    fixations: Sequence[ScriptedFixation],
    jitter_rad: float,
    rng: np.random.Generator,
) -> AttentionStream:
    origin = np.array(GAZE_ORIGIN if modality is Modality.GAZE else HAND_ORIGIN)
    idle_point = _vec(origin + IDLE_DISTANCE * np.array(IDLE_DIRECTION))
    count = int(math.floor((script.end - script.start) * script.rate_hz + 1e-9)) + 1
    ordered = sorted(fixations, key=lambda f: f.start)
    samples = []
    cursor = 0
    for k in range(count):
        t = round(script.start + k / script.rate_hz, 6)
        while cursor < len(ordered) and ordered[cursor].end < t:
            cursor += 1
        current = (
            ordered[cursor]
            if cursor < len(ordered) and ordered[cursor].start <= t <= ordered[cursor].end
            else None
        )
        if current is None:
            samples.append(
                AttentionSample(
                    t=t,
                    origin=_vec(origin),
                    point=idle_point,
                    object_id=None,
                    confidence=1.0,
                    active=modality is Modality.GAZE,
                )
            )
            continue
        anchor = np.array(script.positions[current.object_id])
        distance = float(np.linalg.norm(anchor - origin))
        direction = _jitter(_unit(anchor - origin), jitter_rad, rng)
        samples.append(
            AttentionSample(
                t=t,
                origin=_vec(origin),
                point=_vec(origin + distance * direction),
                object_id=current.object_id,
                confidence=1.0,
                active=True,
            )
        )
    return AttentionStream(user, modality, script.rate_hz, tuple(samples))


def generate_synthetic_session(
    script: SynthScript,
    noise: NoiseParams | None = None,
    seed: int = 0,
    idt: IdtParams | None = None,
) -> SyntheticSession:
    """Realize a script as a session bundle plus ground-truth labels.

    Gaze streams exist for both participants; pointer streams only for users
    with scripted pointer fixations.

    Raises:
        InconsistentScript: If the script contradicts itself or the jitter
            would break the detector's dispersion threshold
    """
    noise = noise or NoiseParams()
    idt = idt or IdtParams()
    _check_script(script, noise, idt)
    rng = np.random.default_rng(seed)
    jitter_rad = math.radians(noise.jitter_deg)

    streams: dict[StreamKey, AttentionStream] = {}
    for user in sorted(script.participants):
        for modality in (Modality.GAZE, Modality.POINTER):
            scripted = [
                f for f in script.fixations if f.user == user and f.modality is modality
            ]
            if modality is Modality.POINTER and not scripted:
                continue
            streams[(user, modality)] = _stream(
                script, user, modality, scripted, jitter_rad, rng
            )

    per_speaker: dict[str, list[Sentence]] = {u: [] for u in script.participants}
    for s in script.sentences:
        per_speaker[s.speaker].append(Sentence.from_text(s.speaker, s.text, s.start, s.end))
    transcript = merge_transcripts(sorted(per_speaker.items()))
    # merge order must match script order for label sentence indices
    scripted_order = [(s.speaker, " ".join(s.text.split())) for s in script.sentences]
    if [(s.speaker, s.text) for s in transcript.sentences] != scripted_order:
        raise InconsistentScript("Sentence start times must be distinct and ordered")

    bundle = SessionBundle(
        scene=SceneTable.from_objects(script.objects),
        transcript=transcript,
        streams=streams,
    )
    try:
        labels = [parse_label(doc, transcript) for doc in script.labels]
    except ValidationError as e:
        raise InconsistentScript(f"Label does not fit the script: {e}") from e
    for label in labels:
        if label.geometry_id is not None and label.geometry_id not in bundle.scene:
            raise InconsistentScript(f"Label {label.re_id} names unknown geometry")
    logger.info(
        f"Generated {script.fixture_id}: {len(streams)} streams, "
        f"{len(transcript)} sentences, {len(labels)} labels"
    )
    return SyntheticSession(bundle=bundle, labels=labels)


def write_synthetic_session(session: SyntheticSession, out_dir: str | Path) -> Path:
    """Write the bundle files plus labels.json."""
    root = write_bundle(session.bundle, out_dir)
    write_json(root / "labels.json", {"labels": [lb.to_record() for lb in session.labels]})
    return root
