"""Serial and parallel execution of the full extraction pipeline.

The unit of parallelism is one (channel, weighting) task: detection and
measurement of a single weighted stream.  Tasks share nothing but read-only
manifests, so worker results merge through one deterministic sort and the
catalog bytes cannot depend on worker count or completion order.  Cumulative
exposure stays exact under parallelism because each accumulator lives
entirely inside one task.
"""

from __future__ import annotations

import multiprocessing
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

from .errors import RunError
from .pipeline import CatalogSummary, FeatureRecord, extract_stream, sort_records, write_catalog
from .pulse_detect import DetectorConfig, detect_pulses
from .signal_io import ChannelManifest, SampleBuffer, iter_chunks
from .weighting import CANONICAL_ORDER, WeightingKind, WeightingSpec, apply_filter, design_filter

LogFn = Callable[[str], None]


@dataclass(frozen=True)
class RunConfig:
    """One extraction run: what to process, how wide, where to write."""

    out_path: Path | str
    detector: DetectorConfig
    mode: str = "serial"
    worker_count: int = 1
    channels: tuple[int, ...] | None = None  # None = all manifest channels
    weightings: tuple[WeightingKind, ...] = CANONICAL_ORDER
    run_id: str = "run"
    chunk_s: float = 60.0

    def __post_init__(self) -> None:
        if self.mode not in ("serial", "parallel"):
            raise ValueError(f"mode must be serial or parallel, got {self.mode!r}")
        if self.mode == "serial" and self.worker_count != 1:
            raise ValueError("serial mode implies worker_count = 1")
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if not self.weightings:
            raise ValueError("weighting selection is empty")
        if self.channels is not None and len(self.channels) == 0:
            raise ValueError("channel selection is empty")


@dataclass(frozen=True)
class RuntimeReport:
    """Wall-clock accounting of one run, per channel and overall."""

    per_channel_seconds: dict[int, float]
    total_seconds: float
    worker_count: int
    channel_hours: float
    n_records: int
    n_points: int
    n_pulses: int


def weighted_chunks(cm: ChannelManifest, kind: WeightingKind, chunk_s: float) -> Iterator[SampleBuffer]:
    """The channel's sample stream through one weighting filter, chunk by chunk."""
    state = design_filter(WeightingSpec(kind), cm.sample_rate_hz)
    for chunk in iter_chunks(cm, chunk_s):
        state, filtered = apply_filter(state, chunk)
        yield filtered


@dataclass(frozen=True)
class _TaskResult:
    channel_id: int
    kind_value: str
    seconds: float
    n_pulses: int
    records: list[FeatureRecord] = field(repr=False)
    error: str | None = None


def _run_task(args: tuple[ChannelManifest, str, DetectorConfig, float]) -> _TaskResult:
    """Detect and measure one (channel, weighting) stream; never raises."""
    cm, kind_value, detector, chunk_s = args
    kind = WeightingKind(kind_value)
    start = time.perf_counter()
    try:
        events = detect_pulses(weighted_chunks(cm, kind, chunk_s), detector)
        records = extract_stream(cm, kind, events, chunk_s)
    except Exception as exc:  # propagate through the pool as data
        return _TaskResult(cm.channel_id, kind_value, time.perf_counter() - start, 0, [],
                           error=f"{type(exc).__name__}: {exc}")
    return _TaskResult(cm.channel_id, kind_value, time.perf_counter() - start,
                       len(events), records)


def run(
    config: RunConfig,
    manifests: dict[int, ChannelManifest],
    log: LogFn | None = None,
) -> tuple[Path, RuntimeReport]:
    """Execute the pipeline; returns the catalog path and runtime report.

    Any task failure aborts the whole run with a per-task error report, and
    no catalog file is left behind.
    """
    channels = tuple(sorted(manifests)) if config.channels is None else tuple(config.channels)
    missing = [ch for ch in channels if ch not in manifests]
    if missing:
        raise RunError(f"manifest does not cover requested channels: {missing}")

    tasks = [
        (manifests[ch], kind.value, config.detector, config.chunk_s)
        for ch in channels
        for kind in config.weightings
    ]

    wall_start = time.perf_counter()
    results: list[_TaskResult] = []
    if config.mode == "serial":
        for t in tasks:
            res = _run_task(t)
            results.append(res)
            if log:
                log(f"channel {res.channel_id} {res.kind_value}: {res.n_pulses} pulses "
                    f"in {res.seconds:.1f}s")
    else:
        with multiprocessing.Pool(processes=config.worker_count) as pool:
            for res in pool.imap(_run_task, tasks):
                results.append(res)
                if log:
                    log(f"channel {res.channel_id} {res.kind_value}: {res.n_pulses} pulses "
                        f"in {res.seconds:.1f}s")
    wall_seconds = time.perf_counter() - wall_start

    failures = [r for r in results if r.error is not None]
    if failures:
        lines = [f"channel {r.channel_id} {r.kind_value}: {r.error}" for r in failures]
        raise RunError("run aborted; failed tasks:\n  " + "\n  ".join(lines))

    per_channel: dict[int, float] = {ch: 0.0 for ch in channels}
    for r in results:
        per_channel[r.channel_id] += r.seconds

    records = sort_records([rec for r in results for rec in r.records])
    out_path = Path(config.out_path)
    try:
        summary = write_catalog(records, out_path, config.run_id)
    except BaseException:
        out_path.unlink(missing_ok=True)  # never leave a partial catalog
        raise

    total = sum(per_channel.values()) if config.mode == "serial" else wall_seconds
    report = RuntimeReport(
        per_channel_seconds=per_channel,
        total_seconds=total,
        worker_count=config.worker_count,
        channel_hours=sum(manifests[ch].duration_s for ch in channels) / 3600.0,
        n_records=summary.n_records,
        n_points=summary.n_points,
        n_pulses=sum(r.n_pulses for r in results),
    )
    return out_path, report


def estimate_serial(total_channels: int, measured_channel_seconds: float) -> float:
    """Scale one channel's measured serial runtime to the whole deployment."""
    if total_channels <= 0 or measured_channel_seconds <= 0:
        raise ValueError("inputs must be positive")
    return total_channels * measured_channel_seconds


def _hours(seconds: float) -> str:
    return f"{seconds / 3600.0:.2f} h"


def report_text(report: RuntimeReport) -> str:
    """Two-row runtime table (per-channel, all channels) plus key=value lines."""
    lines = ["runtime (nearest values, wall-clock)"]
    per = ", ".join(
        f"ch{ch}={_hours(s)}" for ch, s in sorted(report.per_channel_seconds.items())
    )
    lines.append(f"  per-channel : {per}")
    lines.append(f"  all-channels: {_hours(report.total_seconds)} with {report.worker_count} worker(s)")
    lines.append(f"total_seconds={report.total_seconds:.3f}")
    lines.append(f"worker_count={report.worker_count}")
    lines.append(f"channel_hours={report.channel_hours:.6f}")
    lines.append(f"pulses={report.n_pulses}")
    lines.append(f"records={report.n_records}")
    lines.append(f"points={report.n_points}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BenchResult:
    serial_seconds: float
    parallel_seconds: float
    worker_count: int
    speedup: float
    identical: bool
    serial_catalog: Path
    parallel_catalog: Path


def bench(
    manifests: dict[int, ChannelManifest],
    detector: DetectorConfig,
    out_dir: Path | str,
    worker_count: int = 4,
    weightings: Sequence[WeightingKind] = CANONICAL_ORDER,
    log: LogFn | None = None,
) -> BenchResult:
    """Run serial then parallel over the same input and compare wall time.

    The two catalogs are compared byte for byte; the speedup is
    serial/parallel wall seconds.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = dict(detector=detector, weightings=tuple(weightings))

    t0 = time.perf_counter()
    serial_path, _ = run(
        RunConfig(out_path=out / "catalog_serial.csv", mode="serial", **base),
        manifests, log=log,
    )
    serial_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    parallel_path, _ = run(
        RunConfig(out_path=out / "catalog_parallel.csv", mode="parallel",
                  worker_count=worker_count, **base),
        manifests, log=log,
    )
    parallel_s = time.perf_counter() - t0

    identical = serial_path.read_bytes() == parallel_path.read_bytes()
    return BenchResult(
        serial_seconds=serial_s,
        parallel_seconds=parallel_s,
        worker_count=worker_count,
        speedup=serial_s / parallel_s if parallel_s > 0 else float("inf"),
        identical=identical,
        serial_catalog=serial_path,
        parallel_catalog=parallel_path,
    )


def cpu_count() -> int:
    """Usable core count (affinity-aware where the platform exposes it)."""
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1
