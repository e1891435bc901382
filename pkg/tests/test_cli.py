"""Test command line interface."""

import json
import shutil
from pathlib import Path
from unittest.mock import patch

import pytest
from click.testing import CliRunner

from spatialref import __version__
from spatialref.cli import cli

# Constants for test values
EXIT_VALIDATION = 1
EXIT_BACKEND = 2
CLICK_USAGE_ERROR = 2


@pytest.fixture
def runner():
    """Create CLI runner."""
    return CliRunner()


def _invoke(runner, *args):
    return runner.invoke(cli, ["--no-log-file", *args])


def test_cli_version(runner):
    """Test CLI version command."""
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_cli_help(runner):
    """Test CLI help command."""
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for command in ("ingest", "fixations", "annotate", "select", "augment", "resolve",
                    "evaluate", "pipeline", "synth", "verify-fixtures"):
        assert command in result.output


def test_pipeline_command(runner, tmp_path: Path, cabinets_bundle, fixtures_dir):
    out = tmp_path / "out"
    result = _invoke(runner, "pipeline", "--bundle", str(cabinets_bundle), "--out", str(out))
    assert result.exit_code == 0, result.output
    assert "Pipeline completed!" in result.output
    assert "correctly resolved 2 of 3" in result.output
    golden = (fixtures_dir / "cabinets" / "augmented.golden.txt").read_text()
    assert (out / "augmented.txt").read_text() == golden


def test_stage_commands(runner, tmp_path: Path, sofa_bundle):
    common = ["--bundle", str(sofa_bundle), "--out", str(tmp_path / "out")]
    for stage in ("ingest", "fixations", "annotate", "select", "augment"):
        result = _invoke(runner, stage, *common)
        assert result.exit_code == 0, result.output
    for mode in ("baseline", "system"):
        result = _invoke(runner, "resolve", "--mode", mode, *common)
        assert result.exit_code == 0, result.output
    result = _invoke(runner, "evaluate", *common)
    assert result.exit_code == 0, result.output
    assert "correctly resolved 3 of 3" in result.output


def test_resolve_needs_mode(runner, tmp_path: Path, sofa_bundle):
    result = _invoke(runner, "resolve", "--bundle", str(sofa_bundle), "--out", str(tmp_path))
    assert result.exit_code == CLICK_USAGE_ERROR


def test_missing_bundle_is_validation_error(runner, tmp_path: Path):
    result = _invoke(runner, "ingest", "--bundle", str(tmp_path / "absent"),
                     "--out", str(tmp_path / "out"))
    assert result.exit_code == EXIT_VALIDATION
    assert "ingest: MissingFile" in result.output


def test_undecodable_bundle_is_validation_error(runner, tmp_path: Path, sofa_bundle):
    (sofa_bundle / "scene.json").write_bytes(b'{"objects": [{"id": "caf\xe9"}]}')
    result = _invoke(runner, "ingest", "--bundle", str(sofa_bundle), "--out", str(tmp_path / "out"))
    assert result.exit_code == EXIT_VALIDATION
    assert "ingest: SchemaViolation" in result.output


def test_early_stage_names_stage(runner, tmp_path: Path, sofa_bundle):
    result = _invoke(runner, "select", "--bundle", str(sofa_bundle), "--out", str(tmp_path))
    assert result.exit_code == EXIT_VALIDATION
    assert "select: MissingFile" in result.output


def test_bad_config_is_validation_error(runner, tmp_path: Path, sofa_bundle):
    config = tmp_path / "pipeline.toml"
    config.write_text("[selection]\nlead = -2.0\n")
    result = _invoke(runner, "ingest", "--config", str(config), "--bundle", str(sofa_bundle),
                     "--out", str(tmp_path / "out"))
    assert result.exit_code == EXIT_VALIDATION
    assert "ConfigError" in result.output


def test_replay_miss_is_backend_error(runner, tmp_path: Path, sofa_bundle):
    config = tmp_path / "pipeline.toml"
    config.write_text(f'[remote]\ncache_dir = "{(tmp_path / "empty-cache").as_posix()}"\n')
    result = _invoke(runner, "annotate", "--config", str(config), "--backend", "replay",
                     "--bundle", str(sofa_bundle), "--out", str(tmp_path / "out"))
    assert result.exit_code == EXIT_BACKEND
    assert "annotate: BackendUnavailable" in result.output


@patch("spatialref.cli.Pipeline.ingest")
def test_unexpected_error_aborts(mock_ingest, runner, tmp_path: Path, sofa_bundle):
    mock_ingest.side_effect = RuntimeError("disk on fire")
    result = _invoke(runner, "ingest", "--bundle", str(sofa_bundle), "--out", str(tmp_path))
    assert result.exit_code == 1
    assert "Unexpected error in ingest: disk on fire" in result.output


def test_synth_command(runner, tmp_path: Path, fixtures_dir):
    out = tmp_path / "bundle"
    result = _invoke(runner, "synth", "--script", str(fixtures_dir / "sofa" / "script.json"),
                     "--out", str(out), "--seed", "3")
    assert result.exit_code == 0, result.output
    labels = json.loads((out / "labels.json").read_text())["labels"]
    assert [lb["re_id"] for lb in labels] == ["sofa-1", "sofa-2", "sofa-3"]


def test_synth_rejects_large_jitter(runner, tmp_path: Path, fixtures_dir):
    result = _invoke(runner, "synth", "--script", str(fixtures_dir / "sofa" / "script.json"),
                     "--out", str(tmp_path / "bundle"), "--jitter", "0.4")
    assert result.exit_code == EXIT_VALIDATION
    assert "InconsistentScript" in result.output


def test_verify_fixtures_command(runner, fixtures_dir):
    result = _invoke(runner, "verify-fixtures", "--root", str(fixtures_dir))
    assert result.exit_code == 0, result.output
    assert "cabinets: ok" in result.output
    assert "sofa: ok" in result.output


def test_verify_fixtures_reports_drift(runner, tmp_path: Path, fixtures_dir):
    root = tmp_path / "fixtures"
    shutil.copytree(fixtures_dir, root)
    with open(root / "sofa" / "augmented.golden.txt", "a") as f:
        f.write("[01:05] P2 : Agreed.\n")
    result = _invoke(runner, "verify-fixtures", "--root", str(root))
    assert result.exit_code == EXIT_VALIDATION
    assert "cabinets: ok" in result.output
    assert "sofa:" in result.output and "sha256" in result.output
