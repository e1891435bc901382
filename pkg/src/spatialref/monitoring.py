"""Per-stage progress statistics for pipeline runs."""

from __future__ import annotations

import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any

from .log_config import get_logger

logger = get_logger(__name__)

ERROR_RATE_THRESHOLD = 0.01


@dataclass
class StageStats:
    """Statistics for one pipeline stage."""

    stage: str
    processed: int = 0
    skipped: int = 0
    errors: list[str] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def error_rate(self) -> float:
        """Calculate error rate."""
        if self.processed + self.skipped == 0:
            return 0.0
        return len(self.errors) / (self.processed + self.skipped)

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "processed": self.processed,
            "skipped": self.skipped,
            "errors": len(self.errors),
            "elapsed_s": round(self.elapsed, 3),
        }


class PipelineMonitor:
    """Collect stage statistics and warn on high error rates."""

    def __init__(self) -> None:
        self.stages: list[StageStats] = []

    @contextmanager
    def stage(self, name: str) -> Iterator[StageStats]:
        """Time a stage; the yielded stats are recorded when it finishes."""
        stats = StageStats(stage=name)
        started = time.perf_counter()
        try:
            yield stats
        finally:
            stats.elapsed = time.perf_counter() - started
            self.update_stats(stats)

    def update_stats(self, stats: StageStats) -> None:
        """Record a finished stage and log its progress.

        Args:
            stats: Stage statistics to record
        """
        self.stages.append(stats)
        self.log_progress(stats)
        if stats.error_rate > ERROR_RATE_THRESHOLD:
            logger.warning(f"High error rate in {stats.stage}: {stats.error_rate:.2%}")

    def log_progress(self, stats: StageStats) -> None:
        logger.info(
            f"{stats.stage}: processed={stats.processed}, "
            f"skipped={stats.skipped}, "
            f"errors={len(stats.errors)}, "
            f"elapsed={stats.elapsed:.2f}s"
        )

    def summary(self) -> list[dict[str, Any]]:
        return [s.to_dict() for s in self.stages]
