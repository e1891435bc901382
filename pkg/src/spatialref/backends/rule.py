"""Deterministic offline backends.

The rule annotator matches a closed lexicon of demonstratives, pronouns, place
adverbs and pro-forms, with exclusions for existential "there", complementiser
"that" and temporal deixis. An RE is explicit when its span holds a noun from
the vocabulary ("this mirror") or a scene object is named elsewhere in the
sentence. The rule resolver wraps ``coref.rule_resolve``.
"""

from __future__ import annotations

import re
import tomllib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..annotation import REKind, Span
from ..coref import mention_candidates, rule_resolve
from ..log_config import get_logger
from ..session import Sentence
from .base import AnnotatorBackend, BackendSettings, ResolverBackend

logger = get_logger(__name__)

_TOKEN = re.compile(r"[A-Za-z]+")

Token = tuple[str, int, int]


@dataclass(frozen=True)
class Lexicon:
    demonstratives: frozenset[str]
    pronouns: frozenset[str]
    place_adverbs: frozenset[str]
    pro_forms: frozenset[str]
    determiners: frozenset[str]
    existential_followers: frozenset[str]
    complementizer_followers: frozenset[str]
    temporal_nouns: frozenset[str]
    nouns: frozenset[str]

    @property
    def closed_class(self) -> frozenset[str]:
        return (
            self.demonstratives
            | self.pronouns
            | self.place_adverbs
            | self.pro_forms
            | self.determiners
        )


@lru_cache(maxsize=1)
def load_lexicon() -> Lexicon:
    """Read the packaged lexicon.toml."""
    text = resources.files("spatialref.resources").joinpath("lexicon.toml").read_text(
        encoding="utf-8"
    )
    rule = tomllib.loads(text)["rule"]
    return Lexicon(**{key: frozenset(w.lower() for w in words) for key, words in rule.items()})


def _tokens(text: str) -> list[Token]:
    return [(m.group().lower(), m.start(), m.end()) for m in _TOKEN.finditer(text)]


class RuleAnnotator(AnnotatorBackend):
    """Lexicon-based spatial RE finder."""

    def __init__(self, settings: BackendSettings):
        self.lexicon = load_lexicon()
        self.scene_names = [obj.name for obj in settings.scene]
        self.vocabulary = set(self.lexicon.nouns) | {
            token for name in self.scene_names for token, _, _ in _tokens(name)
        }
        self.vocabulary -= self.lexicon.closed_class
        self.name_patterns = [
            re.compile(rf"\b{re.escape(c)}\b", re.IGNORECASE)
            for c in mention_candidates(self.scene_names)
        ]

    @staticmethod
    def _adjacent(text: str, left: Token, right: Token) -> bool:
        gap = text[left[2] : right[1]]
        return gap == "" or gap.isspace()

    def _next(self, text: str, tokens: list[Token], k: int) -> str | None:
        if k + 1 < len(tokens) and self._adjacent(text, tokens[k], tokens[k + 1]):
            return tokens[k + 1][0]
        return None

    def _demonstrative_span(self, text: str, tokens: list[Token], k: int) -> Span:
        start, end = tokens[k][1], tokens[k][2]
        j = k
        while j + 1 < len(tokens) and tokens[j + 1][0] in self.vocabulary and self._adjacent(
            text, tokens[j], tokens[j + 1]
        ):
            j += 1
        if j > k:
            return start, tokens[j][2]
        nxt = self._next(text, tokens, k)
        if nxt in self.lexicon.pro_forms:
            return start, tokens[k + 1][2]
        if nxt == "other" and self._next(text, tokens, k + 1) in self.lexicon.pro_forms:
            return start, tokens[k + 2][2]
        return start, end

    def _pro_form_span(self, text: str, tokens: list[Token], k: int) -> Span | None:
        determiners = self.lexicon.determiners
        if k >= 1 and self._adjacent(text, tokens[k - 1], tokens[k]):
            previous = tokens[k - 1][0]
            if (
                previous == "other"
                and k >= 2  # noqa: PLR2004
                and tokens[k - 2][0] in determiners
                and self._adjacent(text, tokens[k - 2], tokens[k - 1])
            ):
                return tokens[k - 2][1], tokens[k][2]
            if previous in determiners:
                return tokens[k - 1][1], tokens[k][2]
        return None

    def identify(self, sentence: Sentence) -> list[Span]:
        lex = self.lexicon
        text = sentence.text
        tokens = _tokens(text)
        spans: list[Span] = []
        for k, (word, start, end) in enumerate(tokens):
            nxt = self._next(text, tokens, k)
            if word in lex.demonstratives:
                if nxt in lex.temporal_nouns:
                    continue
                if word == "that" and nxt in lex.complementizer_followers:
                    continue
                spans.append(self._demonstrative_span(text, tokens, k))
            elif word in lex.pronouns:
                spans.append((start, end))
            elif word in lex.place_adverbs:
                if word == "there" and nxt in lex.existential_followers:
                    continue
                spans.append((start, end))
            elif word in lex.pro_forms:
                span = self._pro_form_span(text, tokens, k)
                if span is not None:
                    spans.append(span)
        return spans

    def classify(self, sentence: Sentence, span: Span) -> REKind:
        start, end = span
        inside = _tokens(sentence.text[start:end])
        if any(word in self.vocabulary for word, _, _ in inside):
            return REKind.EXPLICIT
        outside = sentence.text[:start] + " " + sentence.text[end:]
        if any(pattern.search(outside) for pattern in self.name_patterns):
            return REKind.EXPLICIT
        return REKind.IMPLICIT


class RuleResolver(ResolverBackend):
    """Annotation-first, nearest-antecedent resolver."""

    def __init__(self, settings: BackendSettings):
        self.names = [obj.name for obj in settings.scene]

    def resolve(
        self,
        transcript: str,
        sentence: str,
        re_text: str,
        annotation_index: int | None = 0,
    ) -> str:
        return rule_resolve(
            transcript.splitlines(), sentence, re_text, self.names, annotation_index
        )
