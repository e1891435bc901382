"""Augmented transcript rendering.

Every sentence renders as ``[MM:SS] <speaker> : <text>``. Sentences holding an
implicit RE with a selected object get one bracketed annotation per RE
appended, in span order, describing who looked or pointed at what.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .exceptions import DanglingSelection, MissingObjectName, SchemaViolation
from .log_config import get_logger
from .metrics import Measure
from .selection import SelectionResult
from .session import SceneTable, Sentence, Transcript
from .utils import format_timestamp, read_json, whitespace_tokens, write_json

logger = get_logger(__name__)

DEFAULT_TOKEN_BUDGET = 8192

TEMPLATES: dict[Measure, str] = {
    Measure.INDIVIDUAL_POINTING: "[{speaker} was pointing at the {name}]",
    Measure.INDIVIDUAL_GAZING: "[{speaker} looking at the {name}]",
    Measure.CONCURRENT_POINTING: "[{a} and {b} concurrently pointing at the {name}]",
    Measure.RECURRENT_POINTING: "[{a} and {b} recurrently pointing at the {name}]",
    Measure.CONCURRENT_GAZING: "[{a} and {b} concurrently looking at the {name}]",
    Measure.RECURRENT_GAZING: "[{a} and {b} recurrently looking at the {name}]",
}

# A rendered note, whichever template produced it; the name is group 1
_NOTE = (
    r"\[\S+(?: and \S+ (?:concurrently|recurrently))? (?:was )?(?:pointing|looking)"
    r" at the ([^\[\]]+)\]"
)
_NOTE_PATTERN = re.compile(_NOTE)
_ANNOTATION_SUFFIX = re.compile(rf"(?:\s{_NOTE})+$")


@dataclass(frozen=True)
class AugmentedSentence:
    base: Sentence
    annotations: tuple[str, ...] = ()

    def render(self) -> str:
        return render_line(self.base, self.annotations)


@dataclass(frozen=True)
class TranscriptRendering:
    """A rendered transcript, one line per sentence."""

    lines: tuple[str, ...]

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + "\n" if self.lines else ""

    def token_count(self) -> int:
        return whitespace_tokens(self.text)

    def __len__(self) -> int:
        return len(self.lines)


def render_line(s: Sentence, annotations: Sequence[str] = ()) -> str:
    line = f"[{format_timestamp(s.start)}] {s.speaker} : {s.text}"
    for annotation in annotations:
        line += f" {annotation}"
    return line


def strip_annotations(line: str) -> str:
    """Remove the trailing annotations from a rendered line.

    Bracketed speech ("[laughs]") is part of the sentence and stays.
    """
    return _ANNOTATION_SUFFIX.sub("", line)


def annotated_names(line: str) -> list[str]:
    """Object names of a rendered line's annotations, in rendered order."""
    match = _ANNOTATION_SUFFIX.search(line)
    if match is None:
        return []
    return [name.strip() for name in _NOTE_PATTERN.findall(match.group())]


def render_annotation(
    sel: SelectionResult, scene: SceneTable, speakers: tuple[str, str]
) -> str:
    """Natural-language note for one selection.

    Args:
        sel: Selection with an object
        scene: Scene table supplying object names
        speakers: Participant ids; named in sorted order for joint measures

    Raises:
        ValueError: If the selection has no object
        MissingObjectName: If the object is not in the scene table
    """
    if sel.object_id is None or sel.measure is None:
        raise ValueError(f"{sel.re_id} has no selected object")
    obj = scene.get(sel.object_id)
    if obj is None:
        raise MissingObjectName(f"{sel.re_id}: no scene entry for {sel.object_id!r}")
    a, b = sorted(speakers)
    return TEMPLATES[sel.measure].format(speaker=sel.speaker, a=a, b=b, name=obj.name)


def augment_transcript(
    t: Transcript, selections: Iterable[SelectionResult], scene: SceneTable
) -> list[AugmentedSentence]:
    """Attach annotations for every successful selection to its sentence.

    Raises:
        DanglingSelection: If a selection points outside the transcript
    """
    pair = tuple(sorted(t.participants))
    if len(pair) != 2:  # noqa: PLR2004
        raise ValueError(f"Transcript must have two participants, got {pair}")
    per_sentence: dict[int, list[SelectionResult]] = {}
    for sel in selections:
        if not 0 <= sel.sentence_index < len(t):
            raise DanglingSelection(
                f"{sel.re_id} refers to sentence {sel.sentence_index}, "
                f"transcript has {len(t)}"
            )
        if sel.selected:
            per_sentence.setdefault(sel.sentence_index, []).append(sel)

    augmented = []
    for index, sentence in enumerate(t.sentences):
        chosen = sorted(per_sentence.get(index, []), key=lambda s: s.span)
        notes = tuple(
            render_annotation(sel, scene, (pair[0], pair[1])) for sel in chosen
        )
        augmented.append(AugmentedSentence(sentence, notes))
    logger.info(
        f"Augmented {sum(1 for a in augmented if a.annotations)} of "
        f"{len(augmented)} sentences"
    )
    return augmented


def render_plain(t: Transcript) -> TranscriptRendering:
    return TranscriptRendering(tuple(render_line(s) for s in t.sentences))


def render_augmented(augmented: Sequence[AugmentedSentence]) -> TranscriptRendering:
    return TranscriptRendering(tuple(a.render() for a in augmented))


def check_token_budget(
    rendering: TranscriptRendering, budget: int = DEFAULT_TOKEN_BUDGET
) -> bool:
    """Log a warning when a rendering exceeds the token budget.

    Returns:
        bool: True if within budget
    """
    count = rendering.token_count()
    if count > budget:
        logger.warning(
            f"Rendered transcript has {count} whitespace tokens, over the "
            f"budget of {budget}"
        )
        return False
    return True


# -- artifact IO -----------------------------------------------------------


def write_augmented(
    out_dir: str | Path,
    augmented: Sequence[AugmentedSentence],
) -> tuple[TranscriptRendering, TranscriptRendering]:
    """Write plain.txt, augmented.txt and augmented.json.

    Returns:
        tuple: (plain, augmented) renderings
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    plain = TranscriptRendering(tuple(render_line(a.base) for a in augmented))
    rendered = render_augmented(augmented)
    (root / "plain.txt").write_text(plain.text, encoding="utf-8")
    (root / "augmented.txt").write_text(rendered.text, encoding="utf-8")
    write_json(
        root / "augmented.json",
        {
            "sentences": [
                {
                    "index": i,
                    "speaker": a.base.speaker,
                    "start": a.base.start,
                    "end": a.base.end,
                    "text": a.base.text,
                    "annotations": list(a.annotations),
                }
                for i, a in enumerate(augmented)
            ],
            "plain": list(plain.lines),
            "augmented": list(rendered.lines),
        },
    )
    return plain, rendered


def read_renderings(path: str | Path) -> tuple[TranscriptRendering, TranscriptRendering]:
    """Load (plain, augmented) renderings from augmented.json."""
    doc: Any = read_json(path)
    if not isinstance(doc, dict):
        raise SchemaViolation("augmented.json must be a JSON object", path)
    try:
        plain = TranscriptRendering(tuple(str(x) for x in doc["plain"]))
        augmented = TranscriptRendering(tuple(str(x) for x in doc["augmented"]))
    except (KeyError, TypeError) as e:
        raise SchemaViolation(f"augmented.json missing renderings: {e}", path) from e
    if len(plain) != len(augmented):
        raise SchemaViolation("Plain and augmented renderings differ in length", path)
    return plain, augmented
