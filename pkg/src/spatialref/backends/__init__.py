"""Backend registration and management.

This module registers the built-in annotator and resolver backends and
provides access to the backend factory.
"""

from .base import AnnotatorBackend, BackendFactory, BackendSettings, ResolverBackend
from .remote import RemoteAnnotator, RemoteResolver, replay_settings
from .rule import RuleAnnotator, RuleResolver

BackendFactory.register_annotator("rule", RuleAnnotator)
BackendFactory.register_annotator("remote", RemoteAnnotator)
BackendFactory.register_annotator(
    "replay", lambda settings: RemoteAnnotator(replay_settings(settings))
)
BackendFactory.register_resolver("rule", RuleResolver)
BackendFactory.register_resolver("remote", RemoteResolver)
BackendFactory.register_resolver(
    "replay", lambda settings: RemoteResolver(replay_settings(settings))
)


def get_annotator(name: str, settings: BackendSettings) -> AnnotatorBackend:
    """Get an annotator backend by name."""
    return BackendFactory.create_annotator(name, settings)


def get_resolver(name: str, settings: BackendSettings) -> ResolverBackend:
    """Get a resolver backend by name."""
    return BackendFactory.create_resolver(name, settings)


def list_backends() -> list[str]:
    """List registered backend names."""
    return BackendFactory.names()


__all__ = [
    "AnnotatorBackend",
    "BackendFactory",
    "BackendSettings",
    "ResolverBackend",
    "get_annotator",
    "get_resolver",
    "list_backends",
]
