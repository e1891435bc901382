"""
Base classes and interfaces for annotator and resolver backends.

This module defines the abstract interfaces that every backend implements, and
the factory that builds a backend from its registered name.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

from ..annotation import REKind, Span
from ..config import RemoteConfig
from ..session import SceneTable, Sentence


@dataclass(frozen=True)
class BackendSettings:
    """Everything a backend may need to construct itself.

    Attributes:
        scene: Scene table of the session (names feed rule backends)
        remote: Chat-completion settings
        replay_only: Serve from the cache only; never call the API
        client: Pre-built chat client, mainly for tests
    """

    scene: SceneTable = field(default_factory=lambda: SceneTable({}))
    remote: RemoteConfig = field(default_factory=RemoteConfig)
    replay_only: bool = False
    client: Any = None


class AnnotatorBackend(ABC):
    """
    Abstract base class for annotator backends.

    An annotator finds spatial referring expressions in one sentence and
    classifies each as implicit or explicit. Implementations must be
    deterministic for a fixed configuration.
    """

    @abstractmethod
    def __init__(self, settings: BackendSettings):
        """
        Initialize the backend.

        Args:
            settings: Backend settings
        """

    @abstractmethod
    def identify(self, sentence: Sentence) -> list[Span]:
        """
        Find spatial referring expressions in a sentence.

        Args:
            sentence: Sentence to annotate

        Returns:
            Character spans into sentence.text, possibly overlapping
        """

    @abstractmethod
    def classify(self, sentence: Sentence, span: Span) -> REKind:
        """
        Classify one referring expression.

        Args:
            sentence: Sentence holding the expression
            span: Character span of the expression

        Returns:
            EXPLICIT if the referent noun is in the sentence, else IMPLICIT
        """


class ResolverBackend(ABC):
    """
    Abstract base class for resolver backends.

    A resolver names the referent of one implicit RE given the full rendered
    transcript, the RE's rendered sentence and the RE text.
    """

    @abstractmethod
    def __init__(self, settings: BackendSettings):
        """
        Initialize the backend.

        Args:
            settings: Backend settings
        """

    @abstractmethod
    def resolve(
        self,
        transcript: str,
        sentence: str,
        re_text: str,
        annotation_index: int | None = 0,
    ) -> str:
        """
        Resolve one referring expression.

        Args:
            transcript: Full rendered transcript
            sentence: Rendered line of the RE's sentence
            re_text: Surface text of the RE
            annotation_index: Position of the RE's own annotation among the
                sentence's annotations, None if it has none

        Returns:
            Referent text
        """

    def resolve_with_reply(
        self,
        transcript: str,
        sentence: str,
        re_text: str,
        annotation_index: int | None = 0,
    ) -> tuple[str, str]:
        """Resolve and also return the backend's raw reply."""
        referent = self.resolve(transcript, sentence, re_text, annotation_index)
        return referent, referent


class BackendFactory:
    """
    Factory class for creating backend instances.

    This class handles backend registration and instantiation.
    """

    _annotators: dict[str, Callable[[BackendSettings], AnnotatorBackend]] = {}
    _resolvers: dict[str, Callable[[BackendSettings], ResolverBackend]] = {}

    @classmethod
    def register_annotator(
        cls, name: str, factory: Callable[[BackendSettings], AnnotatorBackend]
    ) -> None:
        cls._annotators[name] = factory

    @classmethod
    def register_resolver(
        cls, name: str, factory: Callable[[BackendSettings], ResolverBackend]
    ) -> None:
        cls._resolvers[name] = factory

    @classmethod
    def create_annotator(cls, name: str, settings: BackendSettings) -> AnnotatorBackend:
        """
        Create an annotator backend.

        Args:
            name: Backend name
            settings: Settings passed to the backend

        Returns:
            AnnotatorBackend instance

        Raises:
            ValueError: If the backend is not registered
        """
        if name not in cls._annotators:
            raise ValueError(f"Annotator backend '{name}' not registered")
        return cls._annotators[name](settings)

    @classmethod
    def create_resolver(cls, name: str, settings: BackendSettings) -> ResolverBackend:
        """
        Create a resolver backend.

        Raises:
            ValueError: If the backend is not registered
        """
        if name not in cls._resolvers:
            raise ValueError(f"Resolver backend '{name}' not registered")
        return cls._resolvers[name](settings)

    @classmethod
    def names(cls) -> list[str]:
        return sorted(set(cls._annotators) | set(cls._resolvers))
