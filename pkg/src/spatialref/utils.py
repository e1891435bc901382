"""Utility functions for spatialref."""

import hashlib
import json
import time
from collections.abc import Callable, Iterable, Iterator
from pathlib import Path
from typing import Any, TypeVar

from .exceptions import SchemaViolation
from .log_config import get_logger

logger = get_logger(__name__)

SECONDS_PER_MINUTE = 60

T = TypeVar("T")


def retry_with_backoff(
    max_retries: int = 5,
    initial_wait: float = 1.0,
    max_wait: float = 60.0,
    backoff_factor: float = 2.0,
    retry_on: tuple[type[BaseException], ...] = (Exception,),
) -> Callable[[Callable[..., T]], Callable[..., T]]:
    """Retry a function with exponential backoff.

    This decorator will retry the decorated function on failure with exponential
    backoff. After max_retries attempts, it will raise the last caught exception.

    Args:
        max_retries: Maximum number of attempts before giving up
        initial_wait: Initial wait time between retries in seconds
        max_wait: Maximum wait time between retries in seconds
        backoff_factor: Factor to multiply wait time by after each failure
        retry_on: Exception types that trigger a retry; anything else
            propagates immediately

    Returns:
        A decorator that adds retry behavior to the decorated function.

    Raises:
        Exception: The last exception caught from the decorated function after
        all retries are exhausted.
    """

    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        def wrapper(*args: Any, **kwargs: Any) -> T:
            wait = initial_wait
            last_error: BaseException | None = None
            for attempt in range(max_retries):
                try:
                    return func(*args, **kwargs)
                except retry_on as e:
                    last_error = e
                    if attempt < max_retries - 1:
                        logger.warning(
                            f"Attempt {attempt + 1} failed: {e!s}. Retrying..."
                        )
                        time.sleep(min(wait, max_wait))
                        wait *= backoff_factor
            if last_error is not None:
                raise last_error
            raise ValueError("max_retries is 0")

        return wrapper

    return decorator


def format_timestamp(seconds: float) -> str:
    """Format seconds as MM:SS; minutes keep counting past 59."""
    total = int(max(seconds, 0.0))
    minutes, secs = divmod(total, SECONDS_PER_MINUTE)
    return f"{minutes:02d}:{secs:02d}"


def whitespace_tokens(text: str) -> int:
    """Count whitespace-separated tokens (a rough proxy for model tokens)."""
    return len(text.split())


def canonical_json(data: Any) -> str:
    """Serialize data with sorted keys and no insignificant whitespace."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_hash(data: Any) -> str:
    """SHA-256 hex digest of the canonical JSON form of data."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def file_sha256(path: str | Path) -> str:
    """SHA-256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_json(path: str | Path, data: Any) -> None:
    """Write pretty JSON with a trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
        f.write("\n")


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> int:
    """Write one compact JSON object per line.

    Returns:
        int: Number of records written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            f.write("\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_number, record) pairs from a JSON Lines file.

    Blank lines are skipped.

    Raises:
        SchemaViolation: If a line is not UTF-8 or not a JSON object
    """
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                stripped = raw.decode("utf-8").strip()
            except UnicodeDecodeError as e:
                raise SchemaViolation(f"Not valid UTF-8: {e.reason}", path, line_no) from e
            if not stripped:
                continue
            try:
                item = json.loads(stripped)
            except json.JSONDecodeError as e:
                raise SchemaViolation(f"Invalid JSON: {e.msg}", path, line_no) from e
            if not isinstance(item, dict):
                raise SchemaViolation("Record must be a JSON object", path, line_no)
            yield line_no, item


def read_json(path: str | Path) -> Any:
    """Read a whole JSON document, reporting parse errors with line numbers."""
    with open(path, encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaViolation(f"Invalid JSON: {e.msg}", path, e.lineno) from e
        except UnicodeDecodeError as e:
            raise SchemaViolation(f"Not valid UTF-8: {e.reason}", path) from e
