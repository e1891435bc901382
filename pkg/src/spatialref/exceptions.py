"""Exception hierarchy for spatialref.

Validation errors mean the input (bundle, config, labels, script) is wrong and
map to CLI exit status 1. Backend errors come from annotator/resolver backends
and map to exit status 2.
"""

from pathlib import Path


class SpatialRefError(Exception):
    """Base class for all spatialref errors."""


class ValidationError(SpatialRefError):
    """Input data or configuration failed validation."""


class BackendError(SpatialRefError):
    """An annotator or resolver backend failed."""


class MissingFile(ValidationError):
    """A required bundle or artifact file is absent."""

    def __init__(self, path: str | Path, what: str = "file") -> None:
        self.path = Path(path)
        super().__init__(f"Missing {what}: {self.path}")


class SchemaViolation(ValidationError):
    """A record does not match the expected field names or types."""

    def __init__(
        self, message: str, path: str | Path | None = None, line: int | None = None
    ) -> None:
        self.path = Path(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = f"{self.path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class UnknownObjectId(SchemaViolation):
    """A stream or label references an object missing from the scene table."""


class NonMonotonicTime(SchemaViolation):
    """Sample timestamps decrease within a stream."""


class ZeroVector(ValidationError):
    """A direction set has a near-zero mean and no defined centroid."""


class EmptyWindow(ValidationError):
    """An RE window has zero duration."""


class UnknownRE(ValidationError):
    """A referring expression does not belong to the transcript."""


class MissingObjectName(ValidationError):
    """A selected object id has no entry in the scene table."""


class DanglingSelection(ValidationError):
    """A selection names an RE that is not in the annotated transcript."""


class LabelMismatch(ValidationError):
    """A ground-truth label does not fit the transcript it is scored against."""


class InsufficientData(ValidationError):
    """Too few values for a bootstrap estimate."""


class InconsistentScript(ValidationError):
    """A synthetic session script contradicts itself."""


class FixtureDrift(ValidationError):
    """A fixture file or regenerated artifact differs from the manifest."""

    def __init__(self, path: str | Path, reason: str) -> None:
        self.path = Path(path)
        super().__init__(f"{self.path}: {reason}")


class ConfigError(ValidationError):
    """Pipeline configuration is invalid."""


class BackendUnavailable(BackendError):
    """The backend could not be reached after retries, or a replay cache missed."""


class MalformedBackendReply(BackendError):
    """The backend replied with something that does not parse."""

    def __init__(self, message: str, raw_reply: str = "") -> None:
        self.raw_reply = raw_reply
        super().__init__(message)
