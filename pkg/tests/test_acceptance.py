"""Acceptance gate: one test per primary criterion, in order.

Heavier shared state (the scale-0.1 dataset and its per-codec copies,
plus one cold run of every query under every codec) lives in session
fixtures so each criterion reads from the same evidence.  Each test
ends in record_criterion, which logs a pass/fail line into the pytest
terminal summary and then asserts.
"""

import shutil
import threading
import time
from collections import Counter

import numpy as np
import pytest

from colcrunch import bench, codec, ssb, storage
from colcrunch.buffer import BufferConfig, BufferManager, QueryIoContext, ResourceError
from colcrunch.codec import CodecId, codec_from_name
from colcrunch.executor import Engine
from colcrunch.queries import QUERY_IDS, build_query
from colcrunch.ssb import LINEORDER_U32_COLUMNS
from colcrunch.storage import PageRef

from conftest import record_criterion
from ssb_oracle import run_oracle
from valgen import DISTRIBUTIONS, make_values

SF_FULL = 0.1
SEED_FULL = 5  # chosen so all 13 queries are non-empty at this scale
SF_ORACLE = 0.01
SEED_ORACLE = 12
LIGHT_NAMES = ("vbyte", "pfor", "fastpfor128", "binpack128")
ALL_NAMES = ("raw",) + LIGHT_NAMES + ("brotli",)


@pytest.fixture(scope="session")
def full_datasets(tmp_path_factory):
    """SF=0.1 raw dataset plus one copy per codec (fact integer columns
    recompressed); returns (dirs, compression reports, prep seconds)."""
    t0 = time.perf_counter()
    base = tmp_path_factory.mktemp("acceptance")
    raw_dir = base / "raw"
    ssb.generate_dataset(SF_FULL, SEED_FULL, raw_dir)
    dirs = {"raw": raw_dir}
    reports = {}
    for name in LIGHT_NAMES + ("brotli",):
        d = base / name
        shutil.copytree(raw_dir, d)
        catalog = storage.load_catalog(d)
        codec_id = codec_from_name(name)
        reports[name] = [
            storage.compress_existing_column(catalog, "lineorder", c, codec_id)
            for c in LINEORDER_U32_COLUMNS
        ]
        dirs[name] = d
    return dirs, reports, time.perf_counter() - t0


@pytest.fixture(scope="session")
def cold_runs(full_datasets):
    """One cold run of each query under each codec assignment.

    Per (codec, query): result checksum, bytes read, the page fault
    trace, pages loaded.  Fresh store+buffer per query keeps the buffer
    cold, so bytes_read covers everything the query touched.
    """
    dirs, _, _ = full_datasets
    runs = {}
    elapsed = 0.0
    for name, d in dirs.items():
        catalog = storage.load_catalog(d)
        t0 = time.perf_counter()
        per = {}
        for qid in QUERY_IDS:
            store = storage.ColumnStore(catalog)
            buf = BufferManager(store, BufferConfig(capacity_pages=16384, io_threads=2))
            try:
                ctx = QueryIoContext(qid)
                result = Engine(store, buf).run(build_query(qid), ctx)
                per[qid] = {
                    "checksum": result.checksum(),
                    "rows": len(result.rows),
                    "bytes_read": ctx.bytes_read,
                    "pages_loaded": ctx.pages_loaded,
                    "trace": list(ctx.page_trace),
                }
            finally:
                buf.close()
                store.close()
        elapsed += time.perf_counter() - t0
        runs[name] = per
    return runs, elapsed


def test_criterion_codec_roundtrip():
    # 6 codecs x 5 distributions x sizes up to 10^6: exact roundtrip, < 2 min
    sizes = (0, 1, 127, 128, 129, 16384, 10**6)
    t0 = time.perf_counter()
    checked = 0
    for codec_id in CodecId:
        for dist in DISTRIBUTIONS:
            for size in sizes:
                values = make_values(dist, size, seed=101)
                blob = codec.compress_values(codec_id, values)
                out = codec.decompress_values(codec_id, blob, len(values))
                assert np.array_equal(out, values), (codec_id, dist, size)
                checked += 1
    elapsed = time.perf_counter() - t0
    record_criterion(
        "codec-roundtrip",
        elapsed < 120.0,
        "%d combinations exact in %.1fs (budget 120s)" % (checked, elapsed),
    )


def test_criterion_cross_codec_equivalence(full_datasets, cold_runs, tmp_path_factory):
    # byte-identical results under every codec at SF=0.1, oracle equality at SF=0.01
    _, _, prep_seconds = full_datasets
    runs, run_seconds = cold_runs
    t0 = time.perf_counter()
    mismatches = []
    for qid in QUERY_IDS:
        want = runs["raw"][qid]["checksum"]
        for name in ALL_NAMES:
            if runs[name][qid]["checksum"] != want:
                mismatches.append("%s under %s" % (qid, name))
    empty = [qid for qid in QUERY_IDS if runs["raw"][qid]["rows"] == 0]

    # oracle equality on a separately generated dataset
    tables = ssb.generate_tables(SF_ORACLE, SEED_ORACLE)
    d = tmp_path_factory.mktemp("oracle") / "data"
    ssb.write_tables(tables, d, page_size_bytes=16384)
    store = storage.ColumnStore(storage.load_catalog(d))
    buf = BufferManager(store, BufferConfig(capacity_pages=512, io_threads=2))
    oracle_bad = []
    try:
        engine = Engine(store, buf)
        for qid in QUERY_IDS:
            columns, rows = run_oracle(tables, qid)
            result = engine.run(build_query(qid))
            if result.columns != columns or result.rows != rows:
                oracle_bad.append(qid)
    finally:
        buf.close()
        store.close()
    elapsed = prep_seconds + run_seconds + (time.perf_counter() - t0)
    ok = not mismatches and not oracle_bad and not empty and elapsed < 600.0
    record_criterion(
        "cross-codec-equivalence",
        ok,
        "13 queries x %d codecs byte-identical%s, oracle-equal at sf=%s%s, "
        "all non-empty%s, %.1fs (budget 600s)"
        % (
            len(ALL_NAMES),
            " EXCEPT %s" % mismatches if mismatches else "",
            SF_ORACLE,
            " EXCEPT %s" % oracle_bad if oracle_bad else "",
            " EXCEPT %s" % empty if empty else "",
            elapsed,
        ),
    )


def test_criterion_size_ordering(full_datasets):
    # Brotli < min(FastPFor128, BinaryPacking128, PFor) <= VByte < Raw; Raw/Brotli >= 2
    dirs, _, _ = full_datasets
    totals = {}
    for name, d in dirs.items():
        catalog = storage.load_catalog(d)
        totals[name] = sum(
            storage.data_region_bytes(catalog.get("lineorder", c))
            for c in LINEORDER_U32_COLUMNS
        )
    best_light = min(totals["fastpfor128"], totals["binpack128"], totals["pfor"])
    ratio = totals["raw"] / totals["brotli"]
    ok = (
        totals["brotli"] < best_light <= totals["vbyte"] < totals["raw"]
        and ratio >= 2.0
    )
    record_criterion(
        "size-ordering",
        ok,
        "totals over fact integer columns: %s; raw/brotli = %.2f (>= 2.0)"
        % (", ".join("%s=%d" % (n, totals[n]) for n in ALL_NAMES), ratio),
    )


def test_criterion_compression_asymmetry(full_datasets):
    # heavy compression wall time >= 10x each light codec's (soft criterion)
    _, reports, _ = full_datasets
    seconds = {name: sum(r.seconds for r in reports[name]) for name in reports}
    worst = max(seconds[n] for n in LIGHT_NAMES)
    ratio = seconds["brotli"] / worst if worst else float("inf")
    detail = "brotli %.2fs vs slowest light %.2fs: %.1fx (target >= 10x)" % (
        seconds["brotli"],
        worst,
        ratio,
    )
    # hardware-dependent: failure is reported as a warning, not an error
    record_criterion(
        "compression-asymmetry",
        True,
        detail,
        warning=None if ratio >= 10.0 else "below 10x on this hardware",
    )


def test_criterion_bytes_read_reduction(full_datasets, cold_runs):
    # every query, cold buffer: compressed bytes_read < raw bytes_read,
    # and bytes_read replays exactly from the page fault trace
    dirs, _, _ = full_datasets
    runs, _ = cold_runs
    not_reduced = []
    replay_bad = []
    for name in ALL_NAMES:
        catalog = storage.load_catalog(dirs[name])
        store = storage.ColumnStore(catalog)
        try:
            for qid in QUERY_IDS:
                rec = runs[name][qid]
                if name != "raw" and not rec["bytes_read"] < runs["raw"][qid]["bytes_read"]:
                    not_reduced.append("%s under %s" % (qid, name))
                seen = set()
                replayed = 0
                for table, column, page_no, clen in rec["trace"]:
                    key = (table, column, page_no)
                    if key in seen:
                        replay_bad.append("%s/%s duplicate fault %r" % (name, qid, key))
                    seen.add(key)
                    actual = int(store.file(table, column).lengths[page_no])
                    if actual != clen:
                        replay_bad.append("%s/%s extent mismatch %r" % (name, qid, key))
                    replayed += actual
                if replayed != rec["bytes_read"] or len(seen) != rec["pages_loaded"]:
                    replay_bad.append("%s/%s totals" % (name, qid))
        finally:
            store.close()
    ok = not not_reduced and not replay_bad
    record_criterion(
        "bytes-read-reduction",
        ok,
        "13 queries x %d compressed assignments strictly below raw%s; "
        "traces replay exactly%s"
        % (
            len(ALL_NAMES) - 1,
            " EXCEPT %s" % not_reduced if not_reduced else "",
            " EXCEPT %s" % replay_bad[:4] if replay_bad else "",
        ),
    )


def test_criterion_buffer_stress(tmp_path_factory):
    # 16 workers, capacity 64 pages, 10^5 fetch/unpin/prefetch ops
    d = tmp_path_factory.mktemp("stress")
    rng = np.random.default_rng(77)
    values = rng.integers(0, 50_000, 200_000, dtype=np.uint32)
    catalog = storage.Catalog(d)
    catalog.add(storage.write_column(values, CodecId.VByte, 4096, d / "t.v.pcf"))
    store = storage.ColumnStore(catalog)
    n_pages = store.file("t", "v").header.total_pages
    # direct storage decompression, computed once per page up front
    expected = {}
    for page in range(n_pages):
        payload = store.read_page(PageRef("t", "v", page))
        expected[page] = codec.decompress_values(
            payload.codec, payload.data, payload.value_count
        )

    capacity = 64
    workers = 16
    ops_per_worker = 100_000 // workers
    violations = []
    buf = BufferManager(store, BufferConfig(capacity_pages=capacity, io_threads=2))

    def worker(seed):
        wrng = np.random.default_rng(seed)
        pins = []
        for _ in range(ops_per_worker):
            op = int(wrng.integers(0, 10))
            try:
                if op < 6:
                    page = int(wrng.integers(0, n_pages))
                    h = buf.fetch(PageRef("t", "v", page))
                    if not np.array_equal(h.block.data, expected[page]):
                        violations.append("content mismatch on page %d" % page)
                    pins.append((page, h))
                elif op < 8 and pins:
                    _, h = pins.pop(int(wrng.integers(0, len(pins))))
                    buf.unpin(h)
                else:
                    start = int(wrng.integers(0, n_pages))
                    buf.prefetch(
                        [PageRef("t", "v", p) for p in range(start, min(start + 4, n_pages))]
                    )
            except ResourceError:
                while pins:
                    buf.unpin(pins.pop()[1])
            if pins:
                # a pinned page must stay resident
                page, h = pins[int(wrng.integers(0, len(pins)))]
                with buf._lock:
                    frame = buf._frames.get(PageRef("t", "v", page))
                    if frame is None or frame.pin_count < 1:
                        violations.append("pinned page %d evicted" % page)
            if len(pins) > 3:
                buf.unpin(pins.pop(0)[1])
            if buf.resident_count() > capacity:
                violations.append("residency exceeded capacity")
        while pins:
            buf.unpin(pins.pop()[1])

    threads = [threading.Thread(target=worker, args=(1000 + s,)) for s in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    buf.drain()
    final_resident = buf.resident_count()
    buf.close()
    store.close()
    ok = not violations and final_resident <= capacity
    record_criterion(
        "buffer-stress",
        ok,
        "%d ops, %d workers, capacity %d: %d violations"
        % (workers * ops_per_worker, workers, capacity, len(violations)),
    )


def test_criterion_io_accounting(full_datasets):
    # read+decompress covers >= 95% of I/O-thread busy time on a full
    # sequential run; heavy codec decompression dominates its read time
    dirs, _, _ = full_datasets
    catalog = storage.load_catalog(dirs["brotli"])
    store = storage.ColumnStore(catalog)
    buf = BufferManager(store, BufferConfig(capacity_pages=16384, io_threads=2))
    try:
        engine = Engine(store, buf)
        for qid in QUERY_IDS:
            engine.run(build_query(qid), QueryIoContext(qid))
        stats = buf.io_stats()
    finally:
        buf.close()
        store.close()
    covered = stats.read_seconds + stats.decompress_seconds
    coverage = covered / stats.busy_seconds if stats.busy_seconds else 0.0
    dec_over_read = (
        stats.decompress_seconds / stats.read_seconds if stats.read_seconds else float("inf")
    )
    ok = coverage >= 0.95 and stats.decompress_seconds > stats.read_seconds
    record_criterion(
        "io-accounting",
        ok,
        "read+decompress covers %.1f%% of busy time (>= 95%%); heavy-codec "
        "decompress/read = %.1fx (magnitude reported, direction asserted)"
        % (100 * coverage, dec_over_read),
    )


def test_criterion_scenario_protocol(tmp_path_factory, monkeypatch):
    # iterations=3: exactly 6 executions per query (3 warm-up discarded),
    # per-iteration shuffles differ, CI95 matches the t-distribution value
    d = tmp_path_factory.mktemp("protocol") / "data"
    ssb.generate_dataset(0.001, 42, d, page_size_bytes=4096)
    executions = Counter()
    original = bench._run_one

    def counting(engine, config, query_id, plan, iteration):
        executions[query_id] += 1
        return original(engine, config, query_id, plan, iteration)

    monkeypatch.setattr(bench, "_run_one", counting)
    cfg = bench.BenchConfig(
        data_dir=d, codec="raw", scenario="sequential", iterations=3,
        capacity_pages=256, seed=11,
    )
    result = bench.run_iterations(cfg)
    orders = [result.meta["query_order"][str(i)] for i in (1, 2, 3)]
    ci = bench.ci95_half_width([1.0, 2.0, 3.0])
    checks = {
        "6 executions per query": set(executions.values()) == {6},
        "3 recorded per query": Counter(r.query_id for r in result.records)
        == Counter({q: 3 for q in QUERY_IDS}),
        "distinct shuffles across iterations": len({tuple(o) for o in orders}) == 3,
        "seeds change the shuffle": bench.shuffle_orders(11, 3) != bench.shuffle_orders(12, 3),
        "seed reproduces the shuffle": bench.shuffle_orders(11, 3) == orders,
        "ci95 of {1,2,3} is 2.484": round(ci, 3) == 2.484,
        "mean of {1,2,3} is 2.0": float(np.mean([1.0, 2.0, 3.0])) == 2.0,
    }
    failed = [name for name, ok in checks.items() if not ok]
    record_criterion(
        "scenario-protocol",
        not failed,
        "all protocol checks hold" if not failed else "failed: %s" % failed,
    )
