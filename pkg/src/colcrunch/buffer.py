"""Fixed-capacity buffer manager over decompressed pages.

Disk pages are compressed; buffer pages are not. Dedicated I/O
threads perform the read and the decompression, so a worker blocked
in fetch() never touches the disk itself and always receives a fully
decoded ValBlock. Each load is timed in two actions (read seconds,
decompress seconds) per I/O thread, and charged to the query whose
request triggered it.

Eviction is CLOCK (second chance) over unpinned frames. Capacity is
reserved before a load starts, so residency never exceeds
capacity_pages. Loads are deduplicated through an in-flight table:
concurrent fetchers of one page share a single read. Prefetch is
best-effort; when no slot can be freed the request is dropped and
counted, and a later demand fetch retries it.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import codec as codec_mod
from . import storage
from .storage import PageRef


class PinError(Exception):
    """Pin/unpin protocol violation (double unpin, pinned reset)."""


class ResourceError(Exception):
    """All frames pinned; no slot can be freed for a demand fetch."""


class PageLoadError(Exception):
    """A load failed; carries the page identity and the original error."""

    def __init__(self, ref: PageRef, original: Exception):
        super().__init__("loading %s.%s page %d: %s" % (ref.table, ref.column, ref.page_no, original))
        self.ref = ref
        self.original = original


@dataclass(frozen=True)
class ValBlock:
    """Decompressed page: identity header plus the decoded values."""

    table: str
    column: str
    page_no: int
    value_count: int
    first_global_position: int
    data: np.ndarray  # u32 values, or fixed-width bytes for string pages


@dataclass
class BufferConfig:
    capacity_pages: int = 16384
    io_threads: int = 2
    prefetch_window: int = 4


@dataclass
class ThreadIoStats:
    read_seconds: float = 0.0
    decompress_seconds: float = 0.0
    bytes_read: int = 0
    pages_loaded: int = 0
    busy_seconds: float = 0.0


@dataclass
class IoStats:
    per_thread: list[ThreadIoStats] = field(default_factory=list)
    hits: int = 0
    misses: int = 0
    prefetch_hits: int = 0
    prefetch_skipped: int = 0

    @property
    def read_seconds(self) -> float:
        return sum(t.read_seconds for t in self.per_thread)

    @property
    def decompress_seconds(self) -> float:
        return sum(t.decompress_seconds for t in self.per_thread)

    @property
    def bytes_read(self) -> int:
        return sum(t.bytes_read for t in self.per_thread)

    @property
    def pages_loaded(self) -> int:
        return sum(t.pages_loaded for t in self.per_thread)

    @property
    def busy_seconds(self) -> float:
        return sum(t.busy_seconds for t in self.per_thread)


class QueryIoContext:
    """Per-query accounting: passed to fetch/prefetch, filled by I/O threads."""

    def __init__(self, query_id: str):
        self.query_id = query_id
        self.lock = threading.Lock()
        self.data_access_seconds = 0.0
        self.io_read_seconds = 0.0
        self.io_decompress_seconds = 0.0
        self.bytes_read = 0
        self.pages_loaded = 0
        self.page_trace: list[tuple[str, str, int, int]] = []

    def charge_load(self, ref: PageRef, compressed_len: int, read_s: float, dec_s: float) -> None:
        with self.lock:
            self.io_read_seconds += read_s
            self.io_decompress_seconds += dec_s
            self.bytes_read += compressed_len
            self.pages_loaded += 1
            self.page_trace.append((ref.table, ref.column, ref.page_no, compressed_len))

    def add_blocked(self, seconds: float) -> None:
        with self.lock:
            self.data_access_seconds += seconds


class _Frame:
    __slots__ = ("ref", "block", "pin_count", "ref_bit", "prefetched")

    def __init__(self, ref: PageRef, block: ValBlock, pin_count: int, prefetched: bool):
        self.ref = ref
        self.block = block
        self.pin_count = pin_count
        self.ref_bit = True
        self.prefetched = prefetched


class _Request:
    __slots__ = ("ref", "event", "error", "frame", "waiters", "prefetch", "ctx")

    def __init__(self, ref: PageRef, prefetch: bool, ctx: QueryIoContext | None):
        self.ref = ref
        self.event = threading.Event()
        self.error: Exception | None = None
        self.frame: _Frame | None = None
        self.waiters = 0
        self.prefetch = prefetch
        self.ctx = ctx


class BlockHandle:
    """Pinned view of a resident block; must be unpinned exactly once."""

    __slots__ = ("block", "_frame", "_released")

    def __init__(self, frame: _Frame):
        self.block = frame.block
        self._frame = frame
        self._released = False


class BufferManager:
    def __init__(self, store: storage.ColumnStore, config: BufferConfig | None = None):
        self.store = store
        self.config = config or BufferConfig()
        if self.config.capacity_pages <= 0 or self.config.io_threads <= 0:
            raise ValueError("capacity_pages and io_threads must be positive")
        self._lock = threading.Lock()
        self._work = threading.Condition(self._lock)
        self._drained = threading.Condition(self._lock)
        self._frames: dict[PageRef, _Frame] = {}
        self._ring: list[_Frame] = []
        self._hand = 0
        self._reserved = 0
        self._inflight: dict[PageRef, _Request] = {}
        self._queue: deque[_Request] = deque()
        self._stats = [ThreadIoStats() for _ in range(self.config.io_threads)]
        self._counters = IoStats()  # hit/miss/prefetch counters only
        self._shutdown = False
        self._threads = [
            threading.Thread(target=self._io_loop, args=(i,), name="colcrunch-io-%d" % i, daemon=True)
            for i in range(self.config.io_threads)
        ]
        for t in self._threads:
            t.start()

    # --- worker-facing API ---------------------------------------------------

    def fetch(self, ref: PageRef, ctx: QueryIoContext | None = None) -> BlockHandle:
        """Blocking: returns the page pinned, loading it if needed."""
        start = time.perf_counter()
        try:
            with self._lock:
                frame = self._frames.get(ref)
                if frame is not None:
                    frame.pin_count += 1
                    frame.ref_bit = True
                    self._counters.hits += 1
                    if frame.prefetched:
                        self._counters.prefetch_hits += 1
                        frame.prefetched = False
                    return BlockHandle(frame)
                req = self._inflight.get(ref)
                if req is None:
                    self._counters.misses += 1
                    req = _Request(ref, prefetch=False, ctx=ctx)
                    self._inflight[ref] = req
                    self._queue.append(req)
                    self._work.notify()
                elif req.prefetch:
                    self._counters.prefetch_hits += 1
                req.waiters += 1
            req.event.wait()
            if req.error is not None:
                raise req.error
            frame = req.frame
            assert frame is not None
            return BlockHandle(frame)
        finally:
            if ctx is not None:
                ctx.add_blocked(time.perf_counter() - start)

    def unpin(self, handle: BlockHandle) -> None:
        if handle._released:
            raise PinError(
                "double unpin of %s.%s page %d"
                % (handle.block.table, handle.block.column, handle.block.page_no)
            )
        handle._released = True
        with self._lock:
            frame = handle._frame
            if frame.pin_count <= 0:
                raise PinError("pin count underflow on %s" % (frame.ref,))
            frame.pin_count -= 1

    def prefetch(self, refs, ctx: QueryIoContext | None = None) -> int:
        """Enqueue speculative loads; returns how many were enqueued."""
        submitted = 0
        with self._lock:
            for ref in refs:
                if ref in self._frames or ref in self._inflight:
                    continue
                req = _Request(ref, prefetch=True, ctx=ctx)
                self._inflight[ref] = req
                self._queue.append(req)
                submitted += 1
            if submitted:
                self._work.notify_all()
        return submitted

    # --- stats / lifecycle -----------------------------------------------------

    def io_stats(self) -> IoStats:
        with self._lock:
            snap = IoStats(
                per_thread=[
                    ThreadIoStats(t.read_seconds, t.decompress_seconds, t.bytes_read, t.pages_loaded, t.busy_seconds)
                    for t in self._stats
                ],
            )
            snap.hits = self._counters.hits
            snap.misses = self._counters.misses
            snap.prefetch_hits = self._counters.prefetch_hits
            snap.prefetch_skipped = self._counters.prefetch_skipped
            return snap

    def reset_stats(self) -> None:
        with self._lock:
            for i in range(len(self._stats)):
                self._stats[i] = ThreadIoStats()
            self._counters = IoStats()

    def resident_count(self) -> int:
        with self._lock:
            return len(self._frames)

    def drain(self, timeout: float = 60.0) -> None:
        """Wait until no request is queued or in flight."""
        deadline = time.monotonic() + timeout
        with self._lock:
            while self._inflight:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise TimeoutError("buffer drain timed out")
                self._drained.wait(remaining)

    def reset(self) -> None:
        """Drop all resident pages; every page must be unpinned."""
        self.drain()
        with self._lock:
            pinned = [f.ref for f in self._frames.values() if f.pin_count > 0]
            if pinned:
                raise PinError("reset with %d pinned pages (first: %s)" % (len(pinned), pinned[0]))
            self._frames.clear()
            self._ring.clear()
            self._hand = 0

    def close(self) -> None:
        with self._lock:
            self._shutdown = True
            self._work.notify_all()
        for t in self._threads:
            t.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # --- I/O thread side ----------------------------------------------------------

    def _evict_one_locked(self) -> bool:
        """CLOCK second chance over unpinned frames; True if a slot was freed."""
        n = len(self._ring)
        for _ in range(2 * n):
            if not self._ring:
                return False
            self._hand %= len(self._ring)
            frame = self._ring[self._hand]
            if frame.pin_count > 0:
                self._hand += 1
                continue
            if frame.ref_bit:
                frame.ref_bit = False
                self._hand += 1
                continue
            del self._ring[self._hand]
            del self._frames[frame.ref]
            return True
        return False

    def _admit_locked(self, req: _Request) -> bool:
        """Reserve a slot for req; False means the request was dropped/failed."""
        while len(self._frames) + self._reserved >= self.config.capacity_pages:
            if self._evict_one_locked():
                continue
            if req.waiters > 0 or not req.prefetch:
                req.error = ResourceError(
                    "no evictable slot for %s.%s page %d (capacity %d, all pinned)"
                    % (req.ref.table, req.ref.column, req.ref.page_no, self.config.capacity_pages)
                )
            else:
                self._counters.prefetch_skipped += 1
            del self._inflight[req.ref]
            if not self._inflight:
                self._drained.notify_all()
            req.event.set()
            return False
        self._reserved += 1
        return True

    def _decode(self, ref: PageRef, payload: storage.CompressedPayload) -> np.ndarray:
        entry = self.store.entry(ref.table, ref.column)
        if entry.logical_type == storage.U32:
            return codec_mod.decompress_values(payload.codec, payload.data, payload.value_count)
        return storage.parse_string_page(payload.data)

    def _io_loop(self, thread_no: int) -> None:
        while True:
            with self._lock:
                while not self._queue and not self._shutdown:
                    self._work.wait()
                if self._shutdown and not self._queue:
                    return
                req = self._queue.popleft()
                busy_start = time.perf_counter()
                if not self._admit_locked(req):
                    self._stats[thread_no].busy_seconds += time.perf_counter() - busy_start
                    continue
            try:
                t0 = time.perf_counter()
                payload = self.store.read_page(req.ref)
                t1 = time.perf_counter()
                data = self._decode(req.ref, payload)
                t2 = time.perf_counter()
            except Exception as exc:
                with self._lock:
                    self._reserved -= 1
                    req.error = PageLoadError(req.ref, exc)
                    del self._inflight[req.ref]
                    if not self._inflight:
                        self._drained.notify_all()
                    req.event.set()
                    self._stats[thread_no].busy_seconds += time.perf_counter() - busy_start
                continue
            entry = self.store.entry(req.ref.table, req.ref.column)
            block = ValBlock(
                table=req.ref.table,
                column=req.ref.column,
                page_no=req.ref.page_no,
                value_count=payload.value_count,
                first_global_position=req.ref.page_no * entry.values_per_page,
                data=data,
            )
            read_s, dec_s = t1 - t0, t2 - t1
            if req.ctx is not None:
                req.ctx.charge_load(req.ref, len(payload.data), read_s, dec_s)
            with self._lock:
                self._reserved -= 1
                frame = _Frame(req.ref, block, pin_count=req.waiters, prefetched=req.prefetch and req.waiters == 0)
                self._frames[req.ref] = frame
                self._ring.append(frame)
                req.frame = frame
                del self._inflight[req.ref]
                if not self._inflight:
                    self._drained.notify_all()
                req.event.set()
                stats = self._stats[thread_no]
                stats.read_seconds += read_s
                stats.decompress_seconds += dec_s
                stats.bytes_read += len(payload.data)
                stats.pages_loaded += 1
                stats.busy_seconds += time.perf_counter() - busy_start
