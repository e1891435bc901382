"""Resolution of implicit spatial REs to explicit referents.

Each RE is resolved on its own, with the whole transcript in every request:
the plain rendering in baseline mode, the augmented one in system mode.
"""

from __future__ import annotations

import re
from collections.abc import Collection, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any

from tqdm import tqdm

from .annotation import ReferringExpression
from .augment import TranscriptRendering, annotated_names, strip_annotations
from .exceptions import MalformedBackendReply, SchemaViolation, UnknownRE
from .log_config import get_logger
from .utils import read_json, whitespace_tokens, write_json

if TYPE_CHECKING:
    from .backends.base import ResolverBackend

logger = get_logger(__name__)

UNRESOLVED = "unresolved"

_LINE_PREFIX = re.compile(r"^\[\d+:\d{2}\] \S+ : ")


class ResolutionMode(str, Enum):
    BASELINE = "baseline"
    SYSTEM = "system"


@dataclass(frozen=True)
class Resolution:
    """Referent chosen for one RE in one mode, with the backend's raw reply."""

    re_id: str
    mode: ResolutionMode
    referent_text: str
    raw_reply: str = ""

    @property
    def resolved(self) -> bool:
        return self.referent_text != UNRESOLVED

    def to_record(self) -> dict[str, Any]:
        return {
            "re_id": self.re_id,
            "mode": self.mode.value,
            "referent_text": self.referent_text,
            "raw_reply": self.raw_reply,
        }

    @classmethod
    def from_record(cls, doc: dict[str, Any]) -> Resolution:
        return cls(
            re_id=doc["re_id"],
            mode=ResolutionMode(doc["mode"]),
            referent_text=doc["referent_text"],
            raw_reply=doc.get("raw_reply", ""),
        )


def line_text(line: str) -> str:
    """Sentence text of a rendered line, without timestamp, speaker or notes."""
    return _LINE_PREFIX.sub("", strip_annotations(line))


def _word_pattern(phrase: str) -> re.Pattern[str]:
    return re.compile(rf"\b{re.escape(phrase)}\b", re.IGNORECASE)


def _last_mention(text: str, candidates: Sequence[str]) -> tuple[int, str] | None:
    """Rightmost candidate mention in text as (end offset, candidate)."""
    best: tuple[int, str] | None = None
    for candidate in candidates:
        for match in _word_pattern(candidate).finditer(text):
            # longer candidates come first, so equal ends keep the longer name
            if best is None or match.end() > best[0]:
                best = (match.end(), candidate)
    return best


def mention_candidates(names: Iterable[str]) -> list[str]:
    """Scene names and their head nouns, longest first."""
    candidates = set()
    for name in names:
        lowered = name.lower().strip()
        if lowered:
            candidates.add(lowered)
            candidates.add(lowered.split()[-1])
    return sorted(candidates, key=lambda c: (-len(c), c))


def rule_resolve(
    transcript: TranscriptRendering | Sequence[str],
    re_sentence: str,
    re_text: str,
    names: Iterable[str] = (),
    annotation_index: int | None = 0,
) -> str:
    """Deterministic offline resolution.

    The RE's own annotation on its sentence names the referent. Without one,
    the head noun of the nearest preceding scene-object mention wins, looking
    first earlier in the RE's own sentence and then back through the
    transcript. Mentions inside annotations are ignored.

    Args:
        transcript: Rendered transcript lines
        re_sentence: Rendered line of the RE's sentence
        re_text: Surface text of the RE
        names: Scene object names
        annotation_index: Position of the RE's annotation among the line's
            annotations; None when the RE has none

    Returns:
        str: Referent text, or "unresolved"
    """
    annotated = annotated_names(re_sentence)
    if annotation_index is not None and 0 <= annotation_index < len(annotated):
        return annotated[annotation_index]

    candidates = mention_candidates(names)
    if not candidates:
        return UNRESOLVED
    lines = list(transcript.lines if isinstance(transcript, TranscriptRendering) else transcript)
    target = strip_annotations(re_sentence)
    position = next(
        (i for i, line in enumerate(lines) if strip_annotations(line) == target),
        len(lines),
    )

    own = line_text(re_sentence)
    match = _word_pattern(re_text).search(own) if re_text else None
    before = own[: match.start()] if match else ""
    found = _last_mention(before, candidates)
    if found:
        return found[1].split()[-1]
    for line in reversed(lines[:position]):
        found = _last_mention(line_text(line), candidates)
        if found:
            return found[1].split()[-1]
    return UNRESOLVED


def request_tokens(rendering: TranscriptRendering, sentence_line: str, re_text: str) -> int:
    """Whitespace tokens sent for one RE (transcript + sentence + RE)."""
    return (
        rendering.token_count()
        + whitespace_tokens(sentence_line)
        + whitespace_tokens(re_text)
    )


def annotation_positions(
    res: Iterable[ReferringExpression], annotated: Collection[str] | None = None
) -> dict[str, int | None]:
    """Index of each RE's annotation among the annotations of its sentence.

    Annotations are rendered in span order, one per RE with a selected
    object. REs missing from ``annotated`` have none; None means every RE does.
    """
    per_sentence: dict[int, list[ReferringExpression]] = {}
    for expression in res:
        per_sentence.setdefault(expression.sentence_index, []).append(expression)
    positions: dict[str, int | None] = {}
    for group in per_sentence.values():
        position = 0
        for expression in sorted(group, key=lambda r: r.span):
            if annotated is not None and expression.id not in annotated:
                positions[expression.id] = None
                continue
            positions[expression.id] = position
            position += 1
    return positions


def resolve_all(
    res: Sequence[ReferringExpression],
    plain: TranscriptRendering,
    augmented: TranscriptRendering,
    backend: ResolverBackend,
    mode: ResolutionMode | str,
    max_workers: int = 1,
    show_progress: bool = False,
    annotated: Collection[str] | None = None,
    errors: list[str] | None = None,
) -> list[Resolution]:
    """Resolve every implicit RE in one mode.

    Args:
        res: Implicit REs
        plain: Speech-only rendering
        augmented: Rendering with non-verbal annotations
        backend: Resolver backend
        mode: baseline (plain) or system (augmented)
        max_workers: Concurrent requests; output is always ordered by RE id
        annotated: Ids of REs whose selection was annotated; None for all
        errors: Collects one message per malformed backend reply

    Returns:
        list[Resolution]: One per RE; malformed replies give "unresolved"

    Raises:
        ValueError: If an RE is not implicit or the renderings differ in length
        UnknownRE: If an RE's sentence is outside the renderings
        BackendUnavailable: If the backend cannot be reached
    """
    mode = ResolutionMode(mode)
    if len(plain) != len(augmented):
        raise ValueError("Plain and augmented renderings must come from one session")
    rendering = plain if mode is ResolutionMode.BASELINE else augmented
    ordered = sorted(res, key=lambda r: r.id)
    for expression in ordered:
        if not expression.implicit:
            raise ValueError(f"{expression.id} is not an implicit RE")
        if not 0 <= expression.sentence_index < len(rendering):
            raise UnknownRE(f"{expression.id}: sentence {expression.sentence_index} out of range")

    positions = annotation_positions(ordered, annotated)

    def resolve_one(expression: ReferringExpression) -> Resolution:
        line = rendering.lines[expression.sentence_index]
        try:
            referent, raw = backend.resolve_with_reply(
                rendering.text,
                line,
                expression.text,
                annotation_index=positions[expression.id],
            )
        except MalformedBackendReply as e:
            logger.warning(f"{expression.id} left unresolved: {e}")
            if errors is not None:
                errors.append(f"{expression.id}: {e}")
            return Resolution(expression.id, mode, UNRESOLVED, e.raw_reply)
        referent = referent.strip() or UNRESOLVED
        return Resolution(expression.id, mode, referent, raw)

    if max_workers <= 1:
        resolutions = [
            resolve_one(expression)
            for expression in tqdm(
                ordered, desc=f"Resolving ({mode.value})", disable=not show_progress
            )
        ]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            resolutions = list(pool.map(resolve_one, ordered))

    if ordered:
        mean_tokens = sum(
            request_tokens(rendering, rendering.lines[r.sentence_index], r.text)
            for r in ordered
        ) / len(ordered)
        logger.info(
            f"{mode.value}: resolved {sum(1 for r in resolutions if r.resolved)} of "
            f"{len(resolutions)} REs, {mean_tokens:.1f} whitespace tokens per request"
        )
    return resolutions


def token_stats(
    res: Sequence[ReferringExpression], rendering: TranscriptRendering
) -> dict[str, float]:
    """Mean and max whitespace tokens per request for one rendering."""
    counts = [
        request_tokens(rendering, rendering.lines[r.sentence_index], r.text)
        for r in res
        if 0 <= r.sentence_index < len(rendering)
    ]
    if not counts:
        return {"requests": 0, "mean": 0.0, "max": 0}
    return {
        "requests": len(counts),
        "mean": round(sum(counts) / len(counts), 3),
        "max": max(counts),
    }


# -- artifact IO -----------------------------------------------------------


def read_resolutions(path: str | Path) -> dict[ResolutionMode, list[Resolution]]:
    """Load resolutions.json; absent modes map to empty lists."""
    path = Path(path)
    result: dict[ResolutionMode, list[Resolution]] = {m: [] for m in ResolutionMode}
    if not path.exists():
        return result
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise SchemaViolation("resolutions.json must be a JSON object", path)
    for mode in ResolutionMode:
        try:
            result[mode] = [Resolution.from_record(r) for r in doc.get(mode.value, [])]
        except (KeyError, ValueError, TypeError) as e:
            raise SchemaViolation(f"Bad {mode.value} resolution: {e}", path) from e
    return result


def write_resolutions(
    path: str | Path,
    mode: ResolutionMode,
    resolutions: Sequence[Resolution],
    stats: dict[str, float] | None = None,
) -> None:
    """Replace one mode's resolutions in resolutions.json, keeping the other."""
    path = Path(path)
    doc: dict[str, Any] = {"baseline": [], "system": [], "token_stats": {}}
    if path.exists():
        existing = read_json(path)
        if isinstance(existing, dict):
            doc.update(existing)
    doc[mode.value] = [r.to_record() for r in resolutions]
    if stats is not None:
        doc.setdefault("token_stats", {})[mode.value] = stats
    write_json(path, doc)
