"""Command line interface for spatialref."""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path
from typing import Any, NoReturn, TypeVar

import click
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from . import __version__
from .backends import list_backends
from .config import PipelineConfig, load_config, with_overrides
from .coref import ResolutionMode
from .exceptions import BackendError, SpatialRefError, ValidationError
from .fixtures import verify_fixtures
from .log_config import get_logger, setup_logging
from .monitoring import PipelineMonitor
from .pipeline import Pipeline
from .report import EvalReport
from .synth import NoiseParams, generate_synthetic_session, load_script, write_synthetic_session

console = Console()
logger = get_logger(__name__)

EXIT_VALIDATION = 1
EXIT_BACKEND = 2

T = TypeVar("T")


def _fail(stage: str, error: Exception, code: int) -> NoReturn:
    console.print(f"[red]{stage}: {type(error).__name__}: {escape(str(error))}[/red]")
    logger.error(f"{stage} failed: {error}")
    raise SystemExit(code)


def _guarded(stage: Callable[[], str], action: Callable[[], T]) -> T:
    """Run action, mapping errors to exit codes with the current stage name."""
    try:
        return action()
    except ValidationError as e:
        _fail(stage(), e, EXIT_VALIDATION)
    except BackendError as e:
        _fail(stage(), e, EXIT_BACKEND)
    except SpatialRefError as e:
        _fail(stage(), e, EXIT_VALIDATION)
    except Exception as e:
        console.print(f"[red]Unexpected error in {stage()}: {escape(str(e))}[/red]")
        raise click.Abort() from e


def _config(
    config_path: str | None,
    backend: str | None = None,
    seed: int | None = None,
    lead: float | None = None,
    lag: float | None = None,
) -> PipelineConfig:
    def build() -> PipelineConfig:
        config = load_config(config_path)
        return with_overrides(
            config, seed=seed, lead=lead, lag=lag, annotator=backend, resolver=backend
        )

    return _guarded(lambda: "config", build)


def _print_stats(monitor: PipelineMonitor) -> None:
    table = Table(title="Stage statistics")
    table.add_column("Stage")
    table.add_column("Processed", justify="right")
    table.add_column("Skipped", justify="right")
    table.add_column("Errors", justify="right")
    table.add_column("Elapsed (s)", justify="right")
    for row in monitor.summary():
        table.add_row(
            row["stage"],
            f"{row['processed']:,}",
            f"{row['skipped']:,}",
            f"{row['errors']:,}",
            f"{row['elapsed_s']:.2f}",
        )
    console.print(table)


def _print_report(report: EvalReport) -> None:
    for mode, score in sorted(report.resolution.items()):
        console.print(
            f"[blue]{mode}:[/blue] correctly resolved {score.counts.correct} of "
            f"{score.labelled} implicit REs ({score.correct_rate:.1%})"
        )
    if report.improvement_points is not None:
        console.print(f"Improvement: {report.improvement_points:+.1f} points")
    for recommendation in report.recommendations:
        console.print(f"[yellow]- {recommendation}[/yellow]")


def _stage_options(func: Callable[..., Any]) -> Callable[..., Any]:
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="TOML configuration file"),
        click.option("--bundle", "bundle_path", type=click.Path(), required=True,
                     help="Session bundle directory"),
        click.option("--out", "out_dir", type=click.Path(), required=True,
                     help="Output directory for stage artifacts"),
        click.option("--backend", type=click.Choice(list_backends()), default=None,
                     help="Annotator/resolver backend (overrides the config)"),
        click.option("--seed", type=int, default=None, help="Random seed"),
        click.option("--lead", type=float, default=None, help="Window lead in seconds"),
        click.option("--lag", type=float, default=None, help="Window lag in seconds"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _pipeline(
    config_path: str | None,
    bundle_path: str,
    out_dir: str,
    backend: str | None,
    seed: int | None,
    lead: float | None,
    lag: float | None,
) -> Pipeline:
    config = _config(config_path, backend, seed, lead, lag)
    return Pipeline(bundle_path, out_dir, config, show_progress=True)


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], case_sensitive=False),
    default="WARNING",
    help="Set the logging level (default: WARNING)",
)
@click.option("--no-log-file", is_flag=True, default=False, help="Log to stdout only")
def cli(log_level: str, no_log_file: bool) -> None:
    """spatialref - resolve implicit spatial references with gaze and pointing."""
    setup_logging(level_str=log_level, log_dir=None if no_log_file else "logs")


@cli.command()
@_stage_options
def ingest(**kwargs: Any) -> None:
    """Validate a session bundle."""
    pipeline = _pipeline(**kwargs)
    bundle = _guarded(lambda: pipeline.current_stage, pipeline.ingest)
    console.print(
        f"[green]Bundle OK:[/green] {len(bundle.scene)} objects, "
        f"{len(bundle.transcript)} sentences, {len(bundle.streams)} streams"
    )


@cli.command()
@_stage_options
def fixations(**kwargs: Any) -> None:
    """Detect fixations on every stream."""
    pipeline = _pipeline(**kwargs)
    detected = _guarded(lambda: pipeline.current_stage, pipeline.fixations)
    console.print(f"[green]Detected {sum(len(v) for v in detected.values())} fixations[/green]")


@cli.command()
@_stage_options
def annotate(**kwargs: Any) -> None:
    """Identify and classify spatial REs."""
    pipeline = _pipeline(**kwargs)
    expressions = _guarded(lambda: pipeline.current_stage, pipeline.annotate)
    implicit = sum(1 for e in expressions if e.implicit)
    console.print(f"[green]Found {len(expressions)} REs ({implicit} implicit)[/green]")


@cli.command()
@_stage_options
def select(**kwargs: Any) -> None:
    """Select the referenced object for every implicit RE."""
    pipeline = _pipeline(**kwargs)
    results = _guarded(lambda: pipeline.current_stage, pipeline.select)
    chosen = sum(1 for r in results if r.selected)
    console.print(f"[green]Selected objects for {chosen} of {len(results)} REs[/green]")


@cli.command()
@_stage_options
def augment(**kwargs: Any) -> None:
    """Render the augmented transcript."""
    pipeline = _pipeline(**kwargs)
    _guarded(lambda: pipeline.current_stage, pipeline.augment)
    console.print(f"[green]Wrote {Path(kwargs['out_dir']) / 'augmented.txt'}[/green]")


@cli.command()
@_stage_options
@click.option(
    "--mode",
    type=click.Choice([m.value for m in ResolutionMode]),
    required=True,
    help="baseline (plain transcript) or system (augmented transcript)",
)
def resolve(mode: str, **kwargs: Any) -> None:
    """Resolve implicit REs in one mode."""
    pipeline = _pipeline(**kwargs)
    _guarded(lambda: pipeline.current_stage, lambda: pipeline.resolve(mode))
    console.print(f"[green]Resolved {mode} mode[/green]")


@cli.command()
@_stage_options
@click.option("--labels", "labels_path", type=click.Path(), default=None,
              help="Ground-truth labels (default: <bundle>/labels.json)")
def evaluate(labels_path: str | None, **kwargs: Any) -> None:
    """Score artifacts against ground-truth labels."""
    pipeline = _pipeline(**kwargs)
    report = _guarded(lambda: pipeline.current_stage, lambda: pipeline.evaluate(labels_path))
    _print_report(report)


@cli.command(name="pipeline")
@_stage_options
@click.option("--labels", "labels_path", type=click.Path(), default=None,
              help="Ground-truth labels (default: <bundle>/labels.json)")
def run_pipeline(labels_path: str | None, **kwargs: Any) -> None:
    """Run every stage, then evaluate when labels exist."""
    pipeline = _pipeline(**kwargs)
    report = _guarded(lambda: pipeline.current_stage, lambda: pipeline.run_all(labels_path))
    _print_stats(pipeline.monitor)
    if report is not None:
        _print_report(report)
    console.print("[green]Pipeline completed![/green]")


@cli.command()
@click.option("--script", "script_path", type=click.Path(), required=True,
              help="Synthetic session script (JSON)")
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Bundle directory to write")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML configuration file (seed and I-DT thresholds)")
@click.option("--seed", type=int, default=None, help="Random seed")
@click.option("--jitter", type=float, default=NoiseParams().jitter_deg,
              help="Angular jitter in degrees")
def synth(
    script_path: str,
    out_dir: str,
    config_path: str | None,
    seed: int | None,
    jitter: float,
) -> None:
    """Generate a session bundle and labels from a script."""
    config = _config(config_path, seed=seed)

    def build() -> Path:
        session = generate_synthetic_session(
            load_script(script_path),
            NoiseParams(jitter_deg=jitter),
            seed=config.seed,
            idt=config.idt,
        )
        return write_synthetic_session(session, out_dir)

    root = _guarded(lambda: "synth", build)
    console.print(f"[green]Wrote synthetic bundle to {root}[/green]")


@cli.command(name="verify-fixtures")
@click.option("--root", type=click.Path(), default="fixtures", help="Fixture directory")
def verify_fixtures_command(root: str) -> None:
    """Check fixture hashes and regenerate expected artifacts."""
    results = _guarded(lambda: "verify-fixtures", lambda: verify_fixtures(root))
    for result in results:
        colour = "green" if result.passed else "red"
        console.print(f"[{colour}]{result.id}: {escape(result.message)}[/{colour}]")
    if not all(r.passed for r in results):
        raise SystemExit(EXIT_VALIDATION)


def main() -> None:
    """Main entry point for the CLI."""
    cli()


if __name__ == "__main__":
    main()
