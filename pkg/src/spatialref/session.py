"""Session data model: scene, transcript and attention streams.

A session bundle is one directory::

    scene.json              {"objects": [{"id", "name", "parent_id"?}]}
    transcript_<user>.json  {"segments": [{"start", "end", "text", "words": [...]}]}
    transcript.json         (alternative) merged segments carrying "speaker"
    gaze_<user>.jsonl       one attention sample per line, required per participant
    pointer_<user>.jsonl    optional laser-pointer stream

All times are seconds since session start.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import ijson

from .exceptions import (
    MissingFile,
    NonMonotonicTime,
    SchemaViolation,
    UnknownObjectId,
)
from .log_config import get_logger
from .utils import read_jsonl, write_json, write_jsonl
from .validation import (
    validate_sample,
    validate_scene_graph,
    validate_scene_object,
    validate_segment,
)

logger = get_logger(__name__)

DEFAULT_RATE_HZ = 120.0
LOW_CONFIDENCE = 0.5
PARTICIPANTS_PER_SESSION = 2

Vector = tuple[float, float, float]


class Modality(str, Enum):
    """Attention signal source."""

    GAZE = "gaze"
    POINTER = "pointer"


@dataclass(frozen=True, slots=True)
class SceneObject:
    """One named object or place in the 3D scene."""

    id: str
    name: str
    parent_id: str | None = None


@dataclass(frozen=True)
class SceneTable:
    """Scene objects keyed by id, with parent-chain helpers."""

    objects: Mapping[str, SceneObject]

    def __contains__(self, object_id: object) -> bool:
        return object_id in self.objects

    def __iter__(self) -> Iterator[SceneObject]:
        return iter(self.objects.values())

    def __len__(self) -> int:
        return len(self.objects)

    def get(self, object_id: str) -> SceneObject | None:
        return self.objects.get(object_id)

    def ancestors(self, object_id: str) -> list[str]:
        """Parent chain of an object, nearest first, excluding the object."""
        chain: list[str] = []
        current = self.objects.get(object_id)
        while current is not None and current.parent_id is not None:
            chain.append(current.parent_id)
            current = self.objects.get(current.parent_id)
        return chain

    def related(self, a: str, b: str) -> bool:
        """True when a and b are equal or one is an ancestor of the other."""
        return a == b or a in self.ancestors(b) or b in self.ancestors(a)

    @classmethod
    def from_objects(cls, objects: Iterable[SceneObject]) -> SceneTable:
        return cls({obj.id: obj for obj in objects})

    def to_dict(self) -> dict[str, Any]:
        records: list[dict[str, Any]] = []
        for obj in self.objects.values():
            record: dict[str, Any] = {"id": obj.id, "name": obj.name}
            if obj.parent_id is not None:
                record["parent_id"] = obj.parent_id
            records.append(record)
        return {"objects": records}


@dataclass(frozen=True, slots=True)
class AttentionSample:
    """One gaze or pointer ray observation."""

    t: float
    origin: Vector
    point: Vector
    object_id: str | None = None
    confidence: float = 1.0
    active: bool = True

    @property
    def low_quality(self) -> bool:
        """Blink or tracking-loss sample."""
        return self.confidence < LOW_CONFIDENCE

    @property
    def direction(self) -> Vector:
        """Unnormalized ray direction (point - origin)."""
        return (
            self.point[0] - self.origin[0],
            self.point[1] - self.origin[1],
            self.point[2] - self.origin[2],
        )


@dataclass(frozen=True)
class AttentionStream:
    """Time-ordered samples of one user's gaze or pointer."""

    user: str
    modality: Modality
    rate_hz: float
    samples: tuple[AttentionSample, ...]

    @property
    def period(self) -> float:
        return 1.0 / self.rate_hz


@dataclass(frozen=True, slots=True)
class Word:
    text: str
    start: float
    end: float


@dataclass(frozen=True)
class Sentence:
    """A diarized, word-timestamped utterance."""

    speaker: str
    words: tuple[Word, ...]
    text: str = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "text", " ".join(w.text for w in self.words))

    @property
    def start(self) -> float:
        return self.words[0].start

    @property
    def end(self) -> float:
        return self.words[-1].end

    def with_speaker(self, speaker: str) -> Sentence:
        return Sentence(speaker=speaker, words=self.words)

    @classmethod
    def from_text(
        cls, speaker: str, text: str, start: float, end: float
    ) -> Sentence:
        """Spread the words of text evenly over [start, end]."""
        tokens = text.split()
        if not tokens:
            raise SchemaViolation(f"Sentence text is empty ({speaker} at {start})")
        step = (end - start) / len(tokens)
        words = []
        for i, token in enumerate(tokens):
            w_start = start + i * step
            w_end = end if i == len(tokens) - 1 else start + (i + 1) * step
            words.append(Word(token, w_start, w_end))
        return cls(speaker=speaker, words=tuple(words))


@dataclass(frozen=True)
class Transcript:
    """Sentences in chronological order."""

    sentences: tuple[Sentence, ...]
    participants: frozenset[str]

    def __len__(self) -> int:
        return len(self.sentences)

    def __getitem__(self, index: int) -> Sentence:
        return self.sentences[index]


@dataclass(frozen=True)
class REWindow:
    """Time span over which non-verbal cues count for one RE."""

    start: float
    end: float

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"Window start {self.start} after end {self.end}")

    @property
    def duration(self) -> float:
        return self.end - self.start


StreamKey = tuple[str, Modality]


@dataclass(frozen=True)
class SessionBundle:
    """A validated recording: scene, transcript and attention streams."""

    scene: SceneTable
    transcript: Transcript
    streams: Mapping[StreamKey, AttentionStream]

    @property
    def participants(self) -> tuple[str, ...]:
        return participant_pair(self)

    def stream(self, user: str, modality: Modality) -> AttentionStream | None:
        return self.streams.get((user, modality))


def participant_pair(bundle: SessionBundle) -> tuple[str, ...]:
    """Participant ids in sorted order."""
    return tuple(sorted(bundle.transcript.participants))


def merge_transcripts(
    per_speaker: Sequence[tuple[str, Sequence[Sentence]]],
) -> Transcript:
    """Merge per-speaker sentence lists into one chronological transcript.

    Speaker ids are stamped onto each sentence. The sort is stable, so
    sentences with equal start times keep their input order.
    """
    tagged = [
        sentence.with_speaker(speaker)
        for speaker, sentences in per_speaker
        for sentence in sentences
    ]
    tagged.sort(key=lambda s: s.start)
    return Transcript(
        sentences=tuple(tagged),
        participants=frozenset(speaker for speaker, _ in per_speaker),
    )


def sentence_window(s: Sentence, lead: float, lag: float) -> REWindow:
    """Window [max(0, start - lead), end + lag] around a sentence."""
    if lead < 0 or lag < 0:
        raise ValueError(f"lead and lag must be non-negative, got {lead}, {lag}")
    return REWindow(max(0.0, s.start - lead), s.end + lag)


# -- loading ---------------------------------------------------------------


def _top_level_items(f: Any, key: str, path: Path, **kwargs: Any) -> Iterator[Any]:
    """Stream the items of the document's top-level ``key`` array."""
    found = False

    def watch(events: Iterable[tuple[str, str, Any]]) -> Iterator[tuple[str, str, Any]]:
        nonlocal found
        for prefix, event, value in events:
            if prefix == key and event == "start_array":
                found = True
            yield prefix, event, value

    yield from ijson.items(watch(ijson.parse(f, **kwargs)), f"{key}.item")
    if not found:
        raise SchemaViolation(f'Expected a top-level "{key}" array', path)


def _load_scene(path: Path) -> SceneTable:
    objects: list[SceneObject] = []
    try:
        with open(path, "rb") as f:
            for position, doc in enumerate(_top_level_items(f, "objects", path)):
                is_valid, error = validate_scene_object(doc)
                if not is_valid:
                    raise SchemaViolation(f"objects[{position}]: {error}", path)
                objects.append(
                    SceneObject(doc["id"], doc["name"].strip(), doc.get("parent_id"))
                )
    except ijson.JSONError as e:
        raise SchemaViolation(f"Invalid JSON: {e}", path) from e
    except UnicodeDecodeError as e:
        raise SchemaViolation(f"Not valid UTF-8: {e.reason}", path) from e

    ids = [obj.id for obj in objects]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise SchemaViolation(f"Duplicate object ids: {dupes}", path)
    is_valid, error = validate_scene_graph({obj.id: obj.parent_id for obj in objects})
    if not is_valid:
        raise SchemaViolation(error or "Invalid scene graph", path)
    return SceneTable.from_objects(objects)


def _segment_to_sentence(doc: dict[str, Any], speaker: str) -> Sentence:
    words = tuple(
        Word(w["word"].strip(), float(w["start"]), float(w["end"]))
        for w in doc["words"]
    )
    return Sentence(speaker=speaker, words=words)


def _load_segments(
    path: Path, speaker: str | None
) -> list[tuple[str, Sentence]]:
    """Read transcript segments; speaker None means a merged transcript."""
    out: list[tuple[str, Sentence]] = []
    try:
        with open(path, "rb") as f:
            for position, doc in enumerate(
                _top_level_items(f, "segments", path, use_float=True)
            ):
                is_valid, error = validate_segment(doc, require_speaker=speaker is None)
                if not is_valid:
                    raise SchemaViolation(f"segments[{position}]: {error}", path)
                who = speaker if speaker is not None else doc["speaker"]
                out.append((who, _segment_to_sentence(doc, who)))
    except ijson.JSONError as e:
        raise SchemaViolation(f"Invalid JSON: {e}", path) from e
    except UnicodeDecodeError as e:
        raise SchemaViolation(f"Not valid UTF-8: {e.reason}", path) from e
    return out


def _load_stream(
    path: Path,
    user: str,
    modality: Modality,
    scene: SceneTable,
    rate_hz: float,
) -> AttentionStream:
    samples: list[AttentionSample] = []
    last_t = float("-inf")
    for line_no, doc in read_jsonl(path):
        is_valid, error = validate_sample(doc, modality.value)
        if not is_valid:
            raise SchemaViolation(error or "Invalid sample", path, line_no)
        t = float(doc["t"])
        if t < last_t:
            raise NonMonotonicTime(
                f"Time goes backwards ({last_t} -> {t})", path, line_no
            )
        last_t = t
        object_id = doc.get("object_id")
        if object_id is not None and object_id not in scene:
            raise UnknownObjectId(f"Unknown object id {object_id!r}", path, line_no)
        samples.append(
            AttentionSample(
                t=t,
                origin=tuple(float(v) for v in doc["origin"]),  # type: ignore[arg-type]
                point=tuple(float(v) for v in doc["point"]),  # type: ignore[arg-type]
                object_id=object_id,
                confidence=float(doc["confidence"]),
                active=bool(doc.get("active", True)),
            )
        )
    low = sum(1 for s in samples if s.low_quality)
    if low:
        logger.info(f"{path.name}: {low} of {len(samples)} samples below confidence")
    return AttentionStream(user, modality, rate_hz, tuple(samples))


def _user_from_name(path: Path, prefix: str) -> str:
    return path.stem[len(prefix) :]


def load_bundle(path: str | Path, rate_hz: float = DEFAULT_RATE_HZ) -> SessionBundle:
    """Load and validate a session bundle directory.

    Args:
        path: Bundle directory
        rate_hz: Nominal sample rate of the attention streams

    Returns:
        SessionBundle: Fully validated bundle

    Raises:
        MissingFile: scene.json, transcripts or a participant's gaze stream absent
        SchemaViolation: Field/type mismatch, with file and line context
        UnknownObjectId: A sample references an object missing from the scene
        NonMonotonicTime: Sample times decrease within a stream
    """
    root = Path(path)
    if not root.is_dir():
        raise MissingFile(root, "bundle directory")
    scene_path = root / "scene.json"
    if not scene_path.exists():
        raise MissingFile(scene_path)
    scene = _load_scene(scene_path)

    per_speaker: dict[str, list[Sentence]] = {}
    transcript_files = sorted(root.glob("transcript_*.json"))
    merged_path = root / "transcript.json"
    if transcript_files:
        for tpath in transcript_files:
            user = _user_from_name(tpath, "transcript_")
            per_speaker[user] = [s for _, s in _load_segments(tpath, user)]
    elif merged_path.exists():
        for user, sentence in _load_segments(merged_path, None):
            per_speaker.setdefault(user, []).append(sentence)
    else:
        raise MissingFile(root / "transcript_<user>.json", "transcript")

    gaze_files = {
        _user_from_name(p, "gaze_"): p for p in sorted(root.glob("gaze_*.jsonl"))
    }
    participants = sorted(set(per_speaker) | set(gaze_files))
    if len(participants) != PARTICIPANTS_PER_SESSION:
        raise SchemaViolation(
            f"Expected {PARTICIPANTS_PER_SESSION} participants, found "
            f"{len(participants)}: {participants}",
            root,
        )
    for user in participants:
        if user not in gaze_files:
            raise MissingFile(root / f"gaze_{user}.jsonl", "gaze stream")
        per_speaker.setdefault(user, [])

    streams: dict[StreamKey, AttentionStream] = {}
    for user in participants:
        streams[(user, Modality.GAZE)] = _load_stream(
            gaze_files[user], user, Modality.GAZE, scene, rate_hz
        )
        pointer_path = root / f"pointer_{user}.jsonl"
        if pointer_path.exists():
            streams[(user, Modality.POINTER)] = _load_stream(
                pointer_path, user, Modality.POINTER, scene, rate_hz
            )

    transcript = merge_transcripts([(u, per_speaker[u]) for u in participants])
    logger.info(
        f"Loaded bundle {root}: {len(scene)} objects, {len(transcript)} sentences, "
        f"{len(streams)} streams"
    )
    return SessionBundle(scene=scene, transcript=transcript, streams=streams)


# -- writing ---------------------------------------------------------------


def _sample_record(sample: AttentionSample, modality: Modality) -> dict[str, Any]:
    record: dict[str, Any] = {
        "t": sample.t,
        "origin": list(sample.origin),
        "point": list(sample.point),
    }
    if sample.object_id is not None:
        record["object_id"] = sample.object_id
    record["confidence"] = sample.confidence
    if modality is Modality.POINTER:
        record["active"] = sample.active
    return record


def _segment_record(sentence: Sentence) -> dict[str, Any]:
    return {
        "start": sentence.start,
        "end": sentence.end,
        "text": sentence.text,
        "words": [{"word": w.text, "start": w.start, "end": w.end} for w in sentence.words],
    }


def write_bundle(bundle: SessionBundle, path: str | Path) -> Path:
    """Write a bundle in the layout load_bundle reads."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    write_json(root / "scene.json", bundle.scene.to_dict())
    for user in participant_pair(bundle):
        segments = [
            _segment_record(s) for s in bundle.transcript.sentences if s.speaker == user
        ]
        write_json(root / f"transcript_{user}.json", {"segments": segments})
    for (user, modality), stream in sorted(
        bundle.streams.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
    ):
        write_jsonl(
            root / f"{modality.value}_{user}.jsonl",
            (_sample_record(s, modality) for s in stream.samples),
        )
    return root
