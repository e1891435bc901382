"""Pipeline configuration.

Settings come from a TOML file whose sections mirror the dataclasses below::

    seed = 7

    [session]
    rate_hz = 120.0

    [idt]
    dispersion_deg = 0.5
    min_duration_s = 0.1

    [selection]
    lead = 4.0
    lag = 2.0
    hierarchy = ["concurrent-pointing", "recurrent-pointing", ...]

    [backends]
    annotator = "rule"
    resolver = "rule"

    [remote]
    model = "gpt-4"
    api_key_env = "OPENAI_API_KEY"

Missing sections and keys fall back to the defaults; CLI flags override both.
Secrets are never read from the file, only from the environment variable
named by ``remote.api_key_env``.
"""

from __future__ import annotations

import tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .augment import DEFAULT_TOKEN_BUDGET
from .exceptions import ConfigError, MissingFile
from .fixations import IdtParams
from .log_config import get_logger
from .metrics import Measure
from .selection import SelectionConfig
from .session import DEFAULT_RATE_HZ

logger = get_logger(__name__)

BACKEND_MODES = ("rule", "remote", "replay")
DEFAULT_RESAMPLES = 1000
DEFAULT_LEVEL = 0.95


@dataclass(frozen=True)
class RemoteConfig:
    """Chat-completion backend settings.

    Attributes:
        endpoint: Base URL of an OpenAI-compatible API; None uses the client default
        model: Model name sent with every request
        temperature: Sampling temperature; 0 keeps replies reproducible
        api_key_env: Name of the environment variable holding the API key
        cache_dir: Directory of recorded request/response pairs
        max_in_flight: Concurrent requests
        requests_per_second: Token-bucket refill rate
        burst: Token-bucket capacity
        max_retries: Attempts per request on transient transport errors
        timeout_s: Per-request timeout
    """

    endpoint: str | None = None
    model: str = "gpt-4"
    temperature: float = 0.0
    api_key_env: str = "OPENAI_API_KEY"
    cache_dir: str = "cache/remote"
    max_in_flight: int = 4
    requests_per_second: float = 2.0
    burst: int = 4
    max_retries: int = 3
    timeout_s: float = 60.0

    def validate(self) -> None:
        if not self.model:
            raise ConfigError("remote.model must not be empty")
        if self.temperature < 0:
            raise ConfigError(f"remote.temperature must be >= 0, got {self.temperature}")
        if self.max_in_flight < 1:
            raise ConfigError("remote.max_in_flight must be >= 1")
        if self.requests_per_second <= 0:
            raise ConfigError("remote.requests_per_second must be > 0")
        if self.burst < 1:
            raise ConfigError("remote.burst must be >= 1")
        if self.max_retries < 1:
            raise ConfigError("remote.max_retries must be >= 1")
        if self.timeout_s <= 0:
            raise ConfigError("remote.timeout_s must be > 0")

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class BackendsConfig:
    """Which backend each language stage uses: rule, remote or replay."""

    annotator: str = "rule"
    resolver: str = "rule"

    def validate(self) -> None:
        for stage in ("annotator", "resolver"):
            mode = getattr(self, stage)
            if mode not in BACKEND_MODES:
                raise ConfigError(
                    f"backends.{stage} must be one of {BACKEND_MODES}, got {mode!r}"
                )

    def to_dict(self) -> dict[str, Any]:
        return {"annotator": self.annotator, "resolver": self.resolver}


@dataclass(frozen=True)
class AugmentConfig:
    token_budget: int = DEFAULT_TOKEN_BUDGET

    def validate(self) -> None:
        if self.token_budget < 1:
            raise ConfigError("augment.token_budget must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {"token_budget": self.token_budget}


@dataclass(frozen=True)
class EvaluationConfig:
    """Bootstrap settings for confidence intervals."""

    resamples: int = DEFAULT_RESAMPLES
    level: float = DEFAULT_LEVEL

    def validate(self) -> None:
        if self.resamples < 1:
            raise ConfigError("evaluation.resamples must be >= 1")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"evaluation.level must be in (0, 1), got {self.level}")

    def to_dict(self) -> dict[str, Any]:
        return {"resamples": self.resamples, "level": self.level}


@dataclass(frozen=True)
class PipelineConfig:
    """All settings of one pipeline run."""

    seed: int = 0
    rate_hz: float = DEFAULT_RATE_HZ
    idt: IdtParams = field(default_factory=IdtParams)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    backends: BackendsConfig = field(default_factory=BackendsConfig)
    remote: RemoteConfig = field(default_factory=RemoteConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def validate(self) -> None:
        """Check every section.

        Raises:
            ConfigError: On the first invalid setting
        """
        if self.rate_hz <= 0:
            raise ConfigError(f"session.rate_hz must be > 0, got {self.rate_hz}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        self.idt.validate()
        self.selection.validate()
        self.backends.validate()
        self.remote.validate()
        self.augment.validate()
        self.evaluation.validate()

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "session": {"rate_hz": self.rate_hz},
            "idt": self.idt.to_dict(),
            "selection": self.selection.to_dict(),
            "backends": self.backends.to_dict(),
            "remote": self.remote.to_dict(),
            "augment": self.augment.to_dict(),
            "evaluation": self.evaluation.to_dict(),
        }


def _section(doc: dict[str, Any], name: str, allowed: type) -> dict[str, Any]:
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in fields(allowed)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in [{name}]: {', '.join(unknown)}")
    return raw


def _build(defaults: Any, values: dict[str, Any], name: str) -> Any:
    try:
        return replace(defaults, **values)
    except TypeError as e:
        raise ConfigError(f"[{name}]: {e}") from e


def merge_with_defaults(doc: dict[str, Any]) -> PipelineConfig:
    """Merge a parsed config document over the default configuration.

    Args:
        doc: Parsed TOML document

    Returns:
        PipelineConfig: Merged, unvalidated configuration
    """
    top_level = {"seed", "session", "idt", "selection", "backends", "remote",
                 "augment", "evaluation"}
    unknown = sorted(set(doc) - top_level)
    if unknown:
        raise ConfigError(f"Unknown config sections: {', '.join(unknown)}")
    base = PipelineConfig()

    selection_values = dict(_section(doc, "selection", SelectionConfig))
    if "hierarchy" in selection_values:
        try:
            selection_values["hierarchy"] = tuple(
                Measure(m) for m in selection_values["hierarchy"]
            )
        except ValueError as e:
            raise ConfigError(f"[selection] hierarchy: {e}") from e
    idt = _build(base.idt, _section(doc, "idt", IdtParams), "idt")
    selection = _build(base.selection, selection_values, "selection")

    session = doc.get("session", {})
    if not isinstance(session, dict) or set(session) - {"rate_hz"}:
        raise ConfigError("[session] accepts only rate_hz")

    return PipelineConfig(
        seed=int(doc.get("seed", base.seed)),
        rate_hz=float(session.get("rate_hz", base.rate_hz)),
        idt=idt,
        selection=selection,
        backends=_build(
            base.backends, _section(doc, "backends", BackendsConfig),
            "backends",
        ),
        remote=_build(
            base.remote, _section(doc, "remote", RemoteConfig), "remote"
        ),
        augment=_build(
            base.augment, _section(doc, "augment", AugmentConfig),
            "augment",
        ),
        evaluation=_build(
            base.evaluation,
            _section(doc, "evaluation", EvaluationConfig),
            "evaluation",
        ),
    )


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Load, merge and validate a TOML configuration file.

    Args:
        path: Config file; None returns the validated defaults

    Raises:
        MissingFile: If path does not exist
        ConfigError: If the file does not parse or a value is out of range
    """
    if path is None:
        config = PipelineConfig()
    else:
        path = Path(path)
        if not path.exists():
            raise MissingFile(path, "config file")
        try:
            with open(path, "rb") as f:
                doc = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
        config = merge_with_defaults(doc)
        logger.info(f"Loaded configuration from {path}")
    config.validate()
    return config


def with_overrides(config: PipelineConfig, **overrides: Any) -> PipelineConfig:
    """Apply CLI overrides; None values leave the setting unchanged.

    Recognised keys: seed, lead, lag, annotator, resolver.
    """
    seed = overrides.get("seed")
    lead, lag = overrides.get("lead"), overrides.get("lag")
    annotator, resolver = overrides.get("annotator"), overrides.get("resolver")
    selection = config.selection
    if lead is not None:
        selection = replace(selection, lead=float(lead))
    if lag is not None:
        selection = replace(selection, lag=float(lag))
    backends = config.backends
    if annotator is not None:
        backends = replace(backends, annotator=annotator)
    if resolver is not None:
        backends = replace(backends, resolver=resolver)
    updated = replace(
        config,
        seed=config.seed if seed is None else int(seed),
        selection=selection,
        backends=backends,
    )
    updated.validate()
    return updated
