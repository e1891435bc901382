"""Chat-completion backends.

Requests go through ``ChatClient``, which serves recorded replies from the
replay cache, rate-limits live calls (token bucket plus a max-in-flight
semaphore), retries transient transport errors with backoff and records every
live reply. Replies must be JSON objects; one that does not parse is retried
once with a repair instruction before ``MalformedBackendReply`` is raised.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import tomllib
from dataclasses import replace
from functools import lru_cache
from importlib import resources
from typing import Any

import openai
from dotenv import load_dotenv
from openai import OpenAI

from ..annotation import REKind, Span
from ..config import RemoteConfig
from ..exceptions import BackendUnavailable, MalformedBackendReply
from ..log_config import get_logger
from ..session import Sentence
from ..utils import retry_with_backoff
from .base import AnnotatorBackend, BackendSettings, ResolverBackend
from .cache import ReplayCache, request_key

logger = get_logger(__name__)

TRANSIENT_ERRORS: tuple[type[BaseException], ...] = (
    openai.APIConnectionError,
    openai.RateLimitError,
    openai.InternalServerError,
)
RETRY_WAIT_S = 1.0

Messages = list[dict[str, str]]


@lru_cache(maxsize=1)
def load_prompts() -> dict[str, dict[str, str]]:
    """Read the packaged prompts.toml."""
    text = resources.files("spatialref.resources").joinpath("prompts.toml").read_text(
        encoding="utf-8"
    )
    return tomllib.loads(text)


def _messages(stage: str, **values: str) -> Messages:
    prompts = load_prompts()[stage]
    return [
        {"role": "system", "content": prompts["system"].format()},
        {"role": "user", "content": prompts["user"].format(**values)},
    ]


class TokenBucket:
    """Blocking token bucket: ``rate`` tokens per second, at most ``capacity``."""

    def __init__(self, rate: float, capacity: int) -> None:
        self.rate = rate
        self.capacity = capacity
        self.tokens = float(capacity)
        self.updated = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(
                    self.capacity, self.tokens + (now - self.updated) * self.rate
                )
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


def parse_json_object(raw: str) -> dict[str, Any] | None:
    """Parse a reply as a JSON object, tolerating a surrounding code fence."""
    text = raw.strip()
    fenced = re.match(r"^```(?:json)?\s*(.*?)\s*```$", text, re.DOTALL)
    if fenced:
        text = fenced.group(1)
    try:
        parsed = json.loads(text)
    except json.JSONDecodeError:
        return None
    return parsed if isinstance(parsed, dict) else None


class ChatClient:
    """Cached, rate-limited chat-completion client."""

    def __init__(
        self,
        config: RemoteConfig,
        replay_only: bool = False,
        transport: Any = None,
        cache: ReplayCache | None = None,
    ) -> None:
        """Initialize the client.

        Args:
            config: Remote settings
            replay_only: Never call the API; cache misses raise BackendUnavailable
            transport: OpenAI-compatible client; built on first live call if None
            cache: Reply cache; defaults to one in config.cache_dir
        """
        self.config = config
        self.replay_only = replay_only
        self.cache = cache if cache is not None else ReplayCache(config.cache_dir)
        self._transport = transport
        self.bucket = TokenBucket(config.requests_per_second, config.burst)
        self.in_flight = threading.BoundedSemaphore(config.max_in_flight)
        self.lock = threading.Lock()
        self.live_calls = 0

    def _client(self) -> Any:
        with self.lock:
            if self._transport is None:
                load_dotenv()
                api_key = os.environ.get(self.config.api_key_env)
                if not api_key:
                    raise BackendUnavailable(
                        f"Environment variable {self.config.api_key_env} is not set"
                    )
                self._transport = OpenAI(
                    api_key=api_key,
                    base_url=self.config.endpoint,
                    timeout=self.config.timeout_s,
                    max_retries=0,
                )
            return self._transport

    def build_request(self, messages: Messages) -> dict[str, Any]:
        return {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "response_format": {"type": "json_object"},
            "messages": messages,
        }

    @staticmethod
    def _create(client: Any, request: dict[str, Any]) -> str:
        response = client.chat.completions.create(**request)
        return response.choices[0].message.content or ""

    def _send(self, request: dict[str, Any]) -> str:
        client = self._client()
        send = retry_with_backoff(
            max_retries=self.config.max_retries,
            initial_wait=RETRY_WAIT_S,
            retry_on=TRANSIENT_ERRORS,
        )(self._create)
        try:
            with self.in_flight:
                self.bucket.acquire()
                reply = send(client, request)
        except openai.OpenAIError as e:
            raise BackendUnavailable(f"Chat completion failed: {e}") from e
        with self.lock:
            self.live_calls += 1
        return reply

    def complete(self, request: dict[str, Any]) -> str:
        """Raw reply text for a request, from the cache when possible.

        Raises:
            BackendUnavailable: Replay-only cache miss, missing API key, or
                transport failure after retries
        """
        cached = self.cache.get(request)
        if cached is not None:
            return cached
        if self.replay_only:
            raise BackendUnavailable(
                f"No cached reply for request {request_key(request)[:12]} "
                f"in {self.cache.path}"
            )
        reply = self._send(request)
        self.cache.put(request, reply)
        return reply

    def complete_json(self, messages: Messages) -> tuple[dict[str, Any], str]:
        """Send messages and parse the reply as a JSON object.

        Returns:
            tuple: (parsed object, raw reply text)

        Raises:
            MalformedBackendReply: If the reply does not parse after one repair
        """
        raw = self.complete(self.build_request(messages))
        parsed = parse_json_object(raw)
        if parsed is not None:
            return parsed, raw
        logger.warning("Reply is not a JSON object; asking for a repaired reply")
        repair = [
            *messages,
            {"role": "assistant", "content": raw},
            {"role": "user", "content": load_prompts()["repair"]["user"]},
        ]
        repaired = self.complete(self.build_request(repair))
        parsed = parse_json_object(repaired)
        if parsed is None:
            raise MalformedBackendReply(
                f"Reply is not a JSON object: {repaired[:80]!r}", repaired
            )
        return parsed, repaired


def locate_spans(text: str, expressions: list[str]) -> list[Span]:
    """Map reply strings back to character spans, scanning left to right."""
    spans: list[Span] = []
    cursor = 0
    for expression in expressions:
        needle = expression.strip()
        if not needle:
            continue
        left = r"\b" if needle[0].isalnum() else ""
        right = r"\b" if needle[-1].isalnum() else ""
        pattern = re.compile(left + re.escape(needle) + right, re.IGNORECASE)
        match = pattern.search(text, cursor) or pattern.search(text)
        if match is None:
            logger.warning(f"Expression {needle!r} not found in {text!r}; skipped")
            continue
        spans.append((match.start(), match.end()))
        cursor = match.end()
    return spans


def _client_for(settings: BackendSettings) -> ChatClient:
    if isinstance(settings.client, ChatClient):
        return settings.client
    return ChatClient(
        settings.remote, replay_only=settings.replay_only, transport=settings.client
    )


class RemoteAnnotator(AnnotatorBackend):
    """Identification and classification through chat completion."""

    def __init__(self, settings: BackendSettings):
        self.client = _client_for(settings)

    def identify(self, sentence: Sentence) -> list[Span]:
        parsed, raw = self.client.complete_json(
            _messages("identify", sentence=sentence.text)
        )
        items = parsed.get("spatial_referring_expressions")
        if not isinstance(items, list) or not all(isinstance(i, str) for i in items):
            raise MalformedBackendReply(
                "Reply lacks a 'spatial_referring_expressions' string list", raw
            )
        return locate_spans(sentence.text, items)

    def classify(self, sentence: Sentence, span: Span) -> REKind:
        start, end = span
        parsed, raw = self.client.complete_json(
            _messages(
                "classify", sentence=sentence.text, expression=sentence.text[start:end]
            )
        )
        label = str(parsed.get("classification", "")).strip().lower()
        try:
            return REKind(label)
        except ValueError as e:
            raise MalformedBackendReply(f"Unknown classification {label!r}", raw) from e


class RemoteResolver(ResolverBackend):
    """Referent resolution through chat completion."""

    def __init__(self, settings: BackendSettings):
        self.client = _client_for(settings)

    def resolve_with_reply(
        self,
        transcript: str,
        sentence: str,
        re_text: str,
        annotation_index: int | None = 0,
    ) -> tuple[str, str]:
        # the model reads every annotation on the line itself
        parsed, raw = self.client.complete_json(
            _messages(
                "resolve", transcript=transcript, sentence=sentence, expression=re_text
            )
        )
        referent = parsed.get("referent")
        if not isinstance(referent, str) or not referent.strip():
            raise MalformedBackendReply("Reply lacks a non-empty 'referent'", raw)
        return referent.strip(), raw

    def resolve(
        self,
        transcript: str,
        sentence: str,
        re_text: str,
        annotation_index: int | None = 0,
    ) -> str:
        return self.resolve_with_reply(transcript, sentence, re_text, annotation_index)[0]


def replay_settings(settings: BackendSettings) -> BackendSettings:
    return replace(settings, replay_only=True)
