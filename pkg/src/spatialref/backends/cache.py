"""Disk cache of chat-completion requests and replies.

Entries live in ``<cache_dir>/replies.jsonl`` as ``{"request": ..., "response": ...}``
lines. An entry's key is the SHA-256 of the canonical JSON request, computed
on load, so the file stays readable and diffable.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any

from ..log_config import get_logger
from ..utils import content_hash, read_jsonl

logger = get_logger(__name__)

CACHE_FILE = "replies.jsonl"


def request_key(request: dict[str, Any]) -> str:
    return content_hash(request)


class ReplayCache:
    """Request/response store keyed by content hash."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.path = self.directory / CACHE_FILE
        self.lock = threading.Lock()
        self._entries: dict[str, str] = {}
        if self.path.exists():
            for _, doc in read_jsonl(self.path):
                self._entries[request_key(doc["request"])] = doc["response"]
            logger.info(f"Loaded {len(self._entries)} cached replies from {self.path}")

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, request: object) -> bool:
        return isinstance(request, dict) and request_key(request) in self._entries

    def get(self, request: dict[str, Any]) -> str | None:
        return self._entries.get(request_key(request))

    def put(self, request: dict[str, Any], response: str) -> None:
        """Record a reply; an existing entry for the request is kept."""
        key = request_key(request)
        with self.lock:
            if key in self._entries:
                return
            self._entries[key] = response
            self.directory.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(
                    json.dumps(
                        {"request": request, "response": response},
                        ensure_ascii=False,
                        sort_keys=True,
                    )
                )
                f.write("\n")
