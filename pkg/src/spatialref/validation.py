"""Record validation for session bundles and label files.

Each validator inspects one decoded record and returns ``(is_valid, error)``;
the loaders turn a failed check into a ``SchemaViolation`` carrying the file
and line number.
"""

from collections.abc import Mapping, Sequence
from typing import Any

from .log_config import get_logger

logger = get_logger(__name__)

Check = tuple[bool, str | None]

VECTOR_DIM = 3
MODALITIES = ("gaze", "pointer")
RE_KINDS = ("implicit", "explicit")
REFERENCE_TYPES = ("endophora", "exophora")
TARGET_KINDS = ("object", "place")


def _is_number(value: Any) -> bool:
    return isinstance(value, int | float) and not isinstance(value, bool)


def _is_vector(value: Any) -> bool:
    return (
        isinstance(value, list | tuple)
        and len(value) == VECTOR_DIM
        and all(_is_number(v) for v in value)
    )


def validate_scene_object(doc: Any) -> Check:
    """Validate one entry of scene.json's ``objects`` list."""
    if not isinstance(doc, dict):
        return False, "Scene object must be a JSON object"
    if not isinstance(doc.get("id"), str) or not doc["id"]:
        return False, "Scene object must have a non-empty string 'id'"
    if not isinstance(doc.get("name"), str) or not doc["name"].strip():
        return False, f"Scene object {doc['id']!r} must have a non-empty 'name'"
    parent = doc.get("parent_id")
    if parent is not None and not isinstance(parent, str):
        return False, f"Scene object {doc['id']!r} has a non-string 'parent_id'"
    return True, None


def validate_scene_graph(parents: Mapping[str, str | None]) -> Check:
    """Check that parent links resolve and contain no cycles.

    Args:
        parents: Mapping of object id to parent id (or None)
    """
    for obj_id, parent in parents.items():
        if parent is not None and parent not in parents:
            return False, f"Object {obj_id!r} has unknown parent {parent!r}"
    for start in parents:
        seen = {start}
        current = parents[start]
        while current is not None:
            if current in seen:
                return False, f"Parent links of {start!r} form a cycle"
            seen.add(current)
            current = parents[current]
    return True, None


def validate_segment(doc: Any, require_speaker: bool = False) -> Check:
    """Validate one timestamped transcript segment."""
    if not isinstance(doc, dict):
        return False, "Segment must be a JSON object"
    if require_speaker and not isinstance(doc.get("speaker"), str):
        return False, "Merged transcript segments need a string 'speaker'"
    words = doc.get("words")
    if not isinstance(words, list) or not words:
        return False, "Segment must have a non-empty 'words' list"
    previous_start = float("-inf")
    for position, word in enumerate(words):
        if not isinstance(word, dict):
            return False, f"Word {position} must be a JSON object"
        text = word.get("word")
        if not isinstance(text, str) or not text.strip():
            return False, f"Word {position} must have non-empty 'word' text"
        start, end = word.get("start"), word.get("end")
        if not _is_number(start) or not _is_number(end):
            return False, f"Word {position} needs numeric 'start' and 'end'"
        if start < 0 or start > end:
            return False, f"Word {position} has invalid times [{start}, {end}]"
        if start < previous_start:
            return False, f"Word {position} starts before the previous word"
        previous_start = start
    return True, None


def validate_sample(doc: Any, modality: str) -> Check:
    """Validate one JSONL attention sample record."""
    if not isinstance(doc, dict):
        return False, "Sample must be a JSON object"
    t = doc.get("t")
    if not _is_number(t):
        return False, "Field 't' must be a number"
    if t < 0:
        return False, f"Field 't' must be non-negative, got {t}"
    for key in ("origin", "point"):
        if not _is_vector(doc.get(key)):
            return False, f"Field '{key}' must be a list of 3 numbers"
    confidence = doc.get("confidence")
    if not _is_number(confidence) or not 0.0 <= confidence <= 1.0:
        return False, "Field 'confidence' must be a number in [0, 1]"
    object_id = doc.get("object_id")
    if object_id is not None and not isinstance(object_id, str):
        return False, "Field 'object_id' must be a string when present"
    if object_id is not None and list(doc["origin"]) == list(doc["point"]):
        return False, "Ray origin and hit point coincide"
    active = doc.get("active", True)
    if not isinstance(active, bool):
        return False, "Field 'active' must be a boolean"
    if modality == "gaze" and "active" in doc and not active:
        return False, "Gaze samples cannot be inactive"
    return True, None


def validate_label(doc: Any) -> Check:
    """Validate one ground-truth label record."""
    if not isinstance(doc, dict):
        return False, "Label must be a JSON object"
    for key in ("re_id", "text"):
        if not isinstance(doc.get(key), str) or not doc[key]:
            return False, f"Label needs a non-empty string '{key}'"
    if not isinstance(doc.get("sentence_index"), int):
        return False, "Label needs an integer 'sentence_index'"
    span = doc.get("span")
    if span is not None and not (
        isinstance(span, Sequence) and len(span) == 2  # noqa: PLR2004
    ):
        return False, "Label 'span' must be [start, end]"
    if doc.get("kind") not in RE_KINDS:
        return False, f"Label 'kind' must be one of {RE_KINDS}"
    if doc["kind"] == "implicit":
        if doc.get("reference_type") not in REFERENCE_TYPES:
            return False, "Implicit labels need 'reference_type'"
        if not isinstance(doc.get("geometry_id"), str):
            return False, "Implicit labels need 'geometry_id'"
        if doc.get("target_kind", "object") not in TARGET_KINDS:
            return False, f"Label 'target_kind' must be one of {TARGET_KINDS}"
    aliases = doc.get("referent_aliases", [])
    if not isinstance(aliases, list) or not all(
        isinstance(a, str) and a.strip() for a in aliases
    ):
        return False, "Label 'referent_aliases' must be non-empty strings"
    return True, None
