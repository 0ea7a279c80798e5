"""Benchmark runner: scenarios, iteration protocol, measurement CSVs.

A run works on one dataset directory (one codec assignment).  Scenarios:

  sequential  one worker executes the query set in order; the next query
              starts as soon as the previous returned.
  parallel    the whole set is submitted to a single queue at once,
              worker_threads workers drain it, and the buffer manager is
              pinned to a single I/O thread.

The iteration protocol, per iteration: shuffle the query set (seeded),
run a warm-up pass that fills the buffer (discarded), run the measured
pass (recorded), then drop OS caches via the configured hook and reset
buffer + stats.  Per-query wall time splits into plan (compute) and
data-access (time blocked on fetches); read/decompress seconds and bytes
come from the I/O-thread accounting.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime
import json
import math
import os
import shutil
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.stats

from . import codec as codec_mod
from . import storage
from .buffer import BufferConfig, BufferManager, QueryIoContext
from .executor import Engine
from .queries import QUERY_IDS, build_query

SCENARIOS = ("sequential", "parallel")

TIMING_COLUMNS = (
    "wall_seconds",
    "plan_seconds",
    "data_access_seconds",
    "io_read_seconds",
    "io_decompress_seconds",
)


class BenchError(Exception):
    pass


@dataclass
class BenchConfig:
    data_dir: Path
    codec: str = "raw"  # label for the dataset's codec assignment
    scenario: str = "sequential"
    iterations: int = 10
    capacity_pages: int = 16384
    io_threads: int = 2  # parallel scenario forces 1
    worker_threads: int | None = None  # parallel default: len(query_set)
    prefetch_window: int = 4
    seed: int = 0
    drop_caches_cmd: str | None = None
    simd: bool = True
    expected_checksums: dict[str, str] | None = None

    def effective_io_threads(self) -> int:
        return 1 if self.scenario == "parallel" else self.io_threads

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise BenchError("unknown scenario %r (valid: %s)" % (self.scenario, ", ".join(SCENARIOS)))
        if self.iterations < 1:
            raise BenchError("iterations must be >= 1")


@dataclass
class MeasurementRecord:
    iteration: int
    scenario: str
    codec: str
    query_id: str
    wall_seconds: float
    plan_seconds: float
    data_access_seconds: float
    io_read_seconds: float
    io_decompress_seconds: float
    bytes_read: int
    pages_loaded: int
    result_checksum: str


RECORD_FIELDS = tuple(f.name for f in dataclasses.fields(MeasurementRecord))


@dataclass
class RunResult:
    records: list[MeasurementRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    checksums: dict[str, str] = field(default_factory=dict)


class Session:
    """Store + buffer over one dataset, reused across iterations."""

    def __init__(self, config: BenchConfig, catalog: storage.Catalog):
        config.validate()
        codec_mod.set_simd_enabled(config.simd)
        self.config = config
        self.store = storage.ColumnStore(catalog)
        self.buffer = BufferManager(
            self.store,
            BufferConfig(
                capacity_pages=config.capacity_pages,
                io_threads=config.effective_io_threads(),
                prefetch_window=config.prefetch_window,
            ),
        )

    def close(self) -> None:
        self.buffer.close()
        self.store.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _run_one(engine: Engine, config: BenchConfig, query_id: str, plan, iteration: int) -> MeasurementRecord:
    ctx = QueryIoContext(query_id)
    t0 = time.perf_counter()
    try:
        result = engine.run(plan, ctx)
    except Exception as exc:
        raise BenchError("query %s failed: %s" % (query_id, exc)) from exc
    wall = time.perf_counter() - t0
    data_access = ctx.data_access_seconds
    return MeasurementRecord(
        iteration=iteration,
        scenario=config.scenario,
        codec=config.codec,
        query_id=query_id,
        wall_seconds=wall,
        plan_seconds=max(0.0, wall - data_access),
        data_access_seconds=data_access,
        io_read_seconds=ctx.io_read_seconds,
        io_decompress_seconds=ctx.io_decompress_seconds,
        bytes_read=ctx.bytes_read,
        pages_loaded=ctx.pages_loaded,
        result_checksum=result.checksum(),
    )


def run_scenario(
    config: BenchConfig,
    catalog: storage.Catalog,
    query_set,
    session: Session | None = None,
    iteration: int = 0,
) -> list[MeasurementRecord]:
    """Execute the query set once under the configured scenario.

    Records come back in query_set order.  A standalone call builds (and
    closes) its own session, so its buffer starts cold.
    """
    owns = session is None
    if owns:
        session = Session(config, catalog)
    try:
        plans = [(i, qid, build_query(qid)) for i, qid in enumerate(query_set)]
        if config.scenario == "sequential":
            engine = Engine(session.store, session.buffer)
            return [_run_one(engine, config, qid, plan, iteration) for _, qid, plan in plans]

        # parallel: single submission queue, one engine per worker
        workers = config.worker_threads or len(plans)
        queue = deque(plans)
        results: list[MeasurementRecord | None] = [None] * len(plans)
        errors: list[BenchError] = []
        lock = threading.Lock()

        def worker():
            engine = Engine(session.store, session.buffer)
            while True:
                with lock:
                    if not queue or errors:
                        return
                    idx, qid, plan = queue.popleft()
                try:
                    rec = _run_one(engine, config, qid, plan, iteration)
                except BenchError as exc:
                    with lock:
                        errors.append(exc)
                    return
                results[idx] = rec

        threads = [
            threading.Thread(target=worker, name="colcrunch-worker-%d" % i)
            for i in range(max(1, workers))
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]
        return [r for r in results if r is not None]
    finally:
        if owns:
            session.close()


def _drop_caches(config: BenchConfig, catalog: storage.Catalog) -> tuple[str, str | None]:
    """Best-effort OS cache drop; returns (mode, warning)."""
    if config.drop_caches_cmd:
        try:
            proc = subprocess.run(
                config.drop_caches_cmd, shell=True, capture_output=True, timeout=120
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            return "warm-OS-cache", "cache-drop command failed: %s" % (exc,)
        if proc.returncode != 0:
            return "warm-OS-cache", "cache-drop command exited %d: %s" % (
                proc.returncode,
                proc.stderr.decode(errors="replace").strip(),
            )
        return "command", None
    if hasattr(os, "posix_fadvise"):
        for entry in catalog.entries.values():
            try:
                fd = os.open(catalog.file_path(entry), os.O_RDONLY)
                try:
                    os.posix_fadvise(fd, 0, 0, os.POSIX_FADV_DONTNEED)
                finally:
                    os.close(fd)
            except OSError as exc:
                return "warm-OS-cache", "posix_fadvise failed: %s" % (exc,)
        return "posix_fadvise", None
    return "warm-OS-cache", "no cache-drop mechanism available"


def shuffle_orders(seed: int, iterations: int, query_ids=QUERY_IDS) -> list[list[str]]:
    """The seeded per-iteration query orders; same seed, same orders."""
    rng = np.random.default_rng(seed)
    return [
        [query_ids[i] for i in rng.permutation(len(query_ids))] for _ in range(iterations)
    ]


def run_iterations(config: BenchConfig, query_ids=QUERY_IDS) -> RunResult:
    """Full protocol: per iteration, shuffle + warm-up + measured + cache drop."""
    config.validate()
    catalog = storage.load_catalog(config.data_dir)
    result = RunResult()
    iteration_orders = shuffle_orders(config.seed, config.iterations, query_ids)
    orders: dict[str, list[str]] = {}
    cache_modes: set[str] = set()
    started = datetime.datetime.now(datetime.timezone.utc)
    with Session(config, catalog) as session:
        for iteration in range(1, config.iterations + 1):
            order = iteration_orders[iteration - 1]
            orders[str(iteration)] = order
            # warm-up pass fills the buffer; its records are discarded
            warm = run_scenario(config, catalog, order, session=session, iteration=iteration)
            measured = run_scenario(config, catalog, order, session=session, iteration=iteration)
            for rec in warm + measured:
                expected = result.checksums.setdefault(rec.query_id, rec.result_checksum)
                if rec.result_checksum != expected:
                    raise BenchError(
                        "query %s returned differing results across executions" % rec.query_id
                    )
                if config.expected_checksums is not None:
                    want = config.expected_checksums.get(rec.query_id)
                    if want is not None and rec.result_checksum != want:
                        raise BenchError(
                            "query %s checksum %s does not match expected %s"
                            % (rec.query_id, rec.result_checksum, want)
                        )
            result.records.extend(measured)
            mode, warning = _drop_caches(config, catalog)
            cache_modes.add(mode)
            if warning:
                result.warnings.append("iteration %d: %s" % (iteration, warning))
            session.buffer.reset()
            session.buffer.reset_stats()
    finished = datetime.datetime.now(datetime.timezone.utc)
    result.meta = {
        "scenario": config.scenario,
        "codec": config.codec,
        "iterations": config.iterations,
        "seed": config.seed,
        "query_order": orders,
        "executions_per_query": 2 * config.iterations,
        "recorded_per_query": config.iterations,
        "cache_modes": sorted(cache_modes),
        "heavy_algorithm": codec_mod.HEAVY_ALGORITHM,
        "simd": config.simd,
        "io_threads": config.effective_io_threads(),
        "worker_threads": (
            (config.worker_threads or len(query_ids)) if config.scenario == "parallel" else 1
        ),
        "capacity_pages": config.capacity_pages,
        "data_dir": str(config.data_dir),
        "started_at": started.isoformat(),
        "finished_at": finished.isoformat(),
    }
    return result


# --- statistics and CSV output ---------------------------------------------------


def ci95_half_width(values) -> float:
    """t-distribution 95% confidence half-width of the mean."""
    n = len(values)
    if n < 2:
        return 0.0
    sd = float(np.std(values, ddof=1))
    if sd == 0.0:
        return 0.0
    t = float(scipy.stats.t.ppf(0.975, n - 1))
    return t * sd / math.sqrt(n)


def write_measurements(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(RECORD_FIELDS)
        for rec in records:
            w.writerow([getattr(rec, name) for name in RECORD_FIELDS])


def read_measurements(path) -> list[MeasurementRecord]:
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RECORD_FIELDS:
            raise BenchError(
                "unexpected measurement header %r in %s" % (reader.fieldnames, path)
            )
        for row in reader:
            records.append(
                MeasurementRecord(
                    iteration=int(row["iteration"]),
                    scenario=row["scenario"],
                    codec=row["codec"],
                    query_id=row["query_id"],
                    wall_seconds=float(row["wall_seconds"]),
                    plan_seconds=float(row["plan_seconds"]),
                    data_access_seconds=float(row["data_access_seconds"]),
                    io_read_seconds=float(row["io_read_seconds"]),
                    io_decompress_seconds=float(row["io_decompress_seconds"]),
                    bytes_read=int(row["bytes_read"]),
                    pages_loaded=int(row["pages_loaded"]),
                    result_checksum=row["result_checksum"],
                )
            )
    return records


SUMMARY_FIELDS = (
    "query_id",
    "codec",
    "scenario",
    "n",
    "wall_mean", "wall_ci95",
    "plan_mean", "plan_ci95",
    "data_access_mean", "data_access_ci95",
    "io_read_mean", "io_read_ci95",
    "io_decompress_mean", "io_decompress_ci95",
    "bytes_read_mean",
    "pages_loaded_mean",
)


def summarize(records) -> list[dict]:
    """Per (query_id, codec, scenario): mean and CI95 of each timing column."""
    groups: dict[tuple[str, str, str], list[MeasurementRecord]] = {}
    for rec in records:
        groups.setdefault((rec.query_id, rec.codec, rec.scenario), []).append(rec)
    rows = []
    for (qid, codec, scenario), recs in sorted(groups.items()):
        row = {"query_id": qid, "codec": codec, "scenario": scenario, "n": len(recs)}
        for column in TIMING_COLUMNS:
            values = [getattr(r, column) for r in recs]
            stem = column[: -len("_seconds")]
            row["%s_mean" % stem] = float(np.mean(values))
            row["%s_ci95" % stem] = ci95_half_width(values)
        row["bytes_read_mean"] = float(np.mean([r.bytes_read for r in recs]))
        row["pages_loaded_mean"] = float(np.mean([r.pages_loaded for r in recs]))
        rows.append(row)
    return rows


def write_summary(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        for row in summarize(records):
            w.writerow(row)


def write_outputs(result: RunResult, out_dir, timestamp: str | None = None) -> dict[str, Path]:
    """Timestamped measurement/summary/meta files plus stable latest-* names."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if timestamp is None:
        timestamp = datetime.datetime.now().strftime("%Y%m%d-%H%M%S")
    paths = {}
    measurements = out_dir / ("measurements-%s.csv" % timestamp)
    write_measurements(result.records, measurements)
    summary = out_dir / ("summary-%s.csv" % timestamp)
    write_summary(result.records, summary)
    meta = out_dir / ("meta-%s.json" % timestamp)
    with open(meta, "w") as f:
        json.dump({"meta": result.meta, "warnings": result.warnings}, f, indent=2, sort_keys=True)
        f.write("\n")
    for src, latest in (
        (measurements, "latest-measurements.csv"),
        (summary, "latest-summary.csv"),
        (meta, "latest-meta.json"),
    ):
        shutil.copyfile(src, out_dir / latest)
        paths[latest] = out_dir / latest
    paths.update(
        {"measurements": measurements, "summary": summary, "meta": meta}
    )
    return paths
