"""Test utility functions."""

import json
from pathlib import Path
from unittest.mock import patch

import pytest

from spatialref.exceptions import SchemaViolation
from spatialref.utils import (
    canonical_json,
    content_hash,
    file_sha256,
    format_timestamp,
    read_json,
    read_jsonl,
    retry_with_backoff,
    whitespace_tokens,
    write_json,
    write_jsonl,
)

# Constants for test values
MAX_RETRIES = 3
RETRY_ATTEMPTS = 2


@patch("spatialref.utils.time.sleep")
def test_retry_with_backoff(mock_sleep):
    """Test retry with backoff decorator."""
    counter = 0

    @retry_with_backoff(max_retries=MAX_RETRIES, initial_wait=0.5, backoff_factor=2.0)
    def failing_function():
        nonlocal counter
        counter += 1
        if counter < MAX_RETRIES:
            raise ValueError("Test error")
        return "success"

    # Test successful retry
    assert failing_function() == "success"
    assert counter == MAX_RETRIES
    assert [c.args[0] for c in mock_sleep.call_args_list] == [0.5, 1.0]

    # Test maximum retries exceeded
    counter = 0

    @retry_with_backoff(max_retries=RETRY_ATTEMPTS)
    def always_fails():
        nonlocal counter
        counter += 1
        raise ValueError("Always fails")

    with pytest.raises(ValueError):
        always_fails()
    assert counter == RETRY_ATTEMPTS


@patch("spatialref.utils.time.sleep")
def test_retry_only_on_listed_errors(mock_sleep):
    calls = 0

    @retry_with_backoff(max_retries=MAX_RETRIES, retry_on=(ConnectionError,))
    def broken():
        nonlocal calls
        calls += 1
        raise KeyError("not retried")

    with pytest.raises(KeyError):
        broken()
    assert calls == 1
    mock_sleep.assert_not_called()


@patch("spatialref.utils.time.sleep")
def test_retry_caps_wait(mock_sleep):
    @retry_with_backoff(max_retries=4, initial_wait=10.0, max_wait=15.0)
    def always_fails():
        raise ValueError("down")

    with pytest.raises(ValueError):
        always_fails()
    assert [c.args[0] for c in mock_sleep.call_args_list] == [10.0, 15.0, 15.0]


@pytest.mark.parametrize(
    "seconds,expected",
    [(0.0, "00:00"), (59.9, "00:59"), (154.2, "02:34"), (3725.0, "62:05"), (-3.0, "00:00")],
)
def test_format_timestamp(seconds, expected):
    assert format_timestamp(seconds) == expected


def test_whitespace_tokens():
    assert whitespace_tokens("[02:34] u7 :  There are\tno handles.") == 7
    assert whitespace_tokens("") == 0


def test_content_hash_ignores_key_order():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
    assert content_hash({"b": 1, "a": 2}) == content_hash({"a": 2, "b": 1})
    assert content_hash({"a": 1}) != content_hash({"a": 2})


def test_json_files(tmp_path: Path):
    path = tmp_path / "nested" / "doc.json"
    write_json(path, {"name": "kitchen cabinets"})
    assert path.read_text().endswith("}\n")
    assert read_json(path) == {"name": "kitchen cabinets"}
    assert file_sha256(path) == file_sha256(path)

    path.write_text('{\n  "name": \n}')
    with pytest.raises(SchemaViolation) as excinfo:
        read_json(path)
    assert excinfo.value.line == 3


def test_jsonl_files(tmp_path: Path):
    path = tmp_path / "samples.jsonl"
    assert write_jsonl(path, ({"t": i / 10} for i in range(3))) == 3
    assert [line for line, _ in read_jsonl(path)] == [1, 2, 3]

    path.write_text(json.dumps({"t": 0.0}) + "\n\n[1, 2]\n")
    with pytest.raises(SchemaViolation) as excinfo:
        list(read_jsonl(path))
    assert excinfo.value.line == 3

    path.write_text('{"t": 0.0}\n{"t": \n')
    with pytest.raises(SchemaViolation, match="Invalid JSON"):
        list(read_jsonl(path))
