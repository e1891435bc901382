"""Spatial referring-expression identification and implicit/explicit classification.

The heavy lifting is done by an ``AnnotatorBackend`` (see ``spatialref.backends``);
this module runs it sentence by sentence, resolves overlapping spans and
serializes the annotated transcript (``res.json``).
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any

from .exceptions import MalformedBackendReply, SchemaViolation, UnknownRE
from .log_config import get_logger
from .session import Sentence, Transcript
from .utils import read_json, write_json

if TYPE_CHECKING:
    from .backends.base import AnnotatorBackend

logger = get_logger(__name__)

Span = tuple[int, int]


class REKind(str, Enum):
    IMPLICIT = "implicit"
    EXPLICIT = "explicit"


class ReferenceType(str, Enum):
    """Where the referent of an implicit RE is named, if anywhere."""

    ENDOPHORA = "endophora"
    EXOPHORA = "exophora"


@dataclass(frozen=True)
class ReferringExpression:
    """A spatial referring expression located in one transcript sentence.

    Attributes:
        id: Stable key, ``re-<sentence>-<char offset>``
        sentence_index: Position of the sentence in the transcript
        span: Half-open character range within the sentence text
        text: The spanned substring
        kind: Implicit or explicit, None until classified
        reference_type: Only set on ground-truth labels
    """

    id: str
    sentence_index: int
    span: Span
    text: str
    kind: REKind | None = None
    reference_type: ReferenceType | None = None

    @property
    def implicit(self) -> bool:
        return self.kind is REKind.IMPLICIT

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {
            "id": self.id,
            "sentence_index": self.sentence_index,
            "span": list(self.span),
            "text": self.text,
            "kind": self.kind.value if self.kind else None,
        }
        if self.reference_type is not None:
            record["reference_type"] = self.reference_type.value
        return record

    @classmethod
    def from_record(cls, doc: dict[str, Any]) -> ReferringExpression:
        return cls(
            id=doc["id"],
            sentence_index=int(doc["sentence_index"]),
            span=(int(doc["span"][0]), int(doc["span"][1])),
            text=doc["text"],
            kind=REKind(doc["kind"]) if doc.get("kind") else None,
            reference_type=(
                ReferenceType(doc["reference_type"])
                if doc.get("reference_type")
                else None
            ),
        )


def re_id(sentence_index: int, span: Span) -> str:
    return f"re-{sentence_index:04d}-{span[0]:04d}"


def make_expression(
    sentence_index: int, sentence: Sentence, span: Span
) -> ReferringExpression:
    """Build an unclassified RE, checking the span against the sentence."""
    start, end = span
    if not 0 <= start < end <= len(sentence.text):
        raise ValueError(
            f"Span {span} outside sentence {sentence_index} "
            f"(length {len(sentence.text)})"
        )
    return ReferringExpression(
        id=re_id(sentence_index, span),
        sentence_index=sentence_index,
        span=span,
        text=sentence.text[start:end],
    )


def resolve_overlaps(spans: Iterable[Span]) -> list[Span]:
    """Keep the longest of any overlapping spans; earlier start wins ties."""
    kept: list[Span] = []
    for span in sorted(set(spans), key=lambda s: (-(s[1] - s[0]), s[0])):
        if all(span[1] <= k[0] or span[0] >= k[1] for k in kept):
            kept.append(span)
    return sorted(kept)


def classify_re(
    s: Sentence, re: ReferringExpression, backend: AnnotatorBackend
) -> REKind:
    """Classify one RE of a sentence as implicit or explicit.

    Raises:
        UnknownRE: If the RE's span does not select its text in this sentence
    """
    start, end = re.span
    if s.text[start:end] != re.text:
        raise UnknownRE(f"{re.id} ({re.text!r}) does not belong to {s.text!r}")
    return backend.classify(s, re.span)


def _annotate_sentence(
    index: int,
    sentence: Sentence,
    backend: AnnotatorBackend,
    errors: list[str] | None = None,
) -> list[ReferringExpression]:
    try:
        spans = resolve_overlaps(backend.identify(sentence))
        found = []
        for span in spans:
            expression = make_expression(index, sentence, span)
            found.append(
                replace(expression, kind=classify_re(sentence, expression, backend))
            )
        return found
    except MalformedBackendReply as e:
        logger.warning(f"Skipping sentence {index} ({sentence.text!r}): {e}")
        if errors is not None:
            errors.append(f"sentence {index}: {e}")
        return []


def identify_spatial_res(
    t: Transcript,
    backend: AnnotatorBackend,
    max_workers: int = 1,
    errors: list[str] | None = None,
) -> list[ReferringExpression]:
    """Find and classify spatial REs in every sentence of a transcript.

    Args:
        t: Merged transcript
        backend: Annotator backend
        max_workers: Sentences annotated concurrently; output order is
            always sentence order
        errors: Collects one message per sentence skipped on a malformed reply

    Returns:
        list[ReferringExpression]: Classified REs ordered by (sentence, span)

    Raises:
        ValueError: If the transcript is empty
        BackendUnavailable: If the remote backend cannot be reached
    """
    if len(t) == 0:
        raise ValueError("Cannot annotate an empty transcript")
    indexed = list(enumerate(t.sentences))
    if max_workers <= 1:
        per_sentence = [_annotate_sentence(i, s, backend, errors) for i, s in indexed]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            per_sentence = list(
                pool.map(
                    lambda item: _annotate_sentence(*item, backend, errors), indexed
                )
            )
    expressions = [re for group in per_sentence for re in group]
    implicit = sum(1 for re in expressions if re.implicit)
    logger.info(
        f"Identified {len(expressions)} spatial REs ({implicit} implicit) "
        f"in {len(t)} sentences"
    )
    return expressions


def implicit_only(expressions: Iterable[ReferringExpression]) -> list[ReferringExpression]:
    return [re for re in expressions if re.implicit]


def find_expression(
    t: Transcript, re: ReferringExpression
) -> Sentence:
    """Sentence an RE belongs to.

    Raises:
        UnknownRE: If the sentence index or span does not fit the transcript
    """
    if not 0 <= re.sentence_index < len(t):
        raise UnknownRE(f"{re.id}: sentence {re.sentence_index} not in transcript")
    sentence = t[re.sentence_index]
    start, end = re.span
    if sentence.text[start:end] != re.text:
        raise UnknownRE(f"{re.id}: {re.text!r} not found at {re.span}")
    return sentence


# -- artifact IO -----------------------------------------------------------


def write_annotations(
    path: str | Path, t: Transcript, expressions: Sequence[ReferringExpression]
) -> None:
    """Write the annotated transcript with REs inlined per sentence."""
    by_sentence: dict[int, list[dict[str, Any]]] = {}
    for re in expressions:
        by_sentence.setdefault(re.sentence_index, []).append(re.to_record())
    sentences = [
        {
            "index": i,
            "speaker": s.speaker,
            "start": s.start,
            "end": s.end,
            "text": s.text,
            "res": by_sentence.get(i, []),
        }
        for i, s in enumerate(t.sentences)
    ]
    write_json(path, {"sentences": sentences})


def read_annotations(path: str | Path) -> list[ReferringExpression]:
    """Load the REs from an annotated transcript written by write_annotations."""
    doc = read_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("sentences"), list):
        raise SchemaViolation("Annotated transcript needs a 'sentences' list", path)
    expressions = []
    for sentence in doc["sentences"]:
        for record in sentence.get("res", []):
            try:
                expressions.append(ReferringExpression.from_record(record))
            except (KeyError, ValueError, TypeError) as e:
                raise SchemaViolation(f"Bad RE record: {e}", path) from e
    return expressions
