"""On-disk column files and the catalog.

Column file layout (all integers little-endian):

    +0   magic "PCF1"
    +4   format version     u8 (= 1)
    +5   codec wire byte    u8
    +6   values_per_page    u32
    +10  total_pages        u64
    +18  total_values       u64
    +26  PageIndex: total_pages x {offset u64, compressed_len u32,
         value_count u32}
    then the page bodies, back to back, in page order.

Every page holds exactly values_per_page values except possibly the
last; compression varies only the physical extent. The file is
written in a single pass: header+index space is reserved, pages are
appended while their extents are recorded, then the index is
backpatched.

String columns are stored as Raw byte pages whose body is a slot
directory: count u32, then count+1 u32 offsets relative to the
payload start (offsets[0] = 0), then the payload bytes. They are
never codec-compressed.

The catalog is a line-oriented text file: one record per line,
tab-separated fields in CatalogEntry order, '#' comments, UTF-8.
"""

from __future__ import annotations

import os
import struct
import time
from dataclasses import dataclass, replace
from pathlib import Path
from threading import Lock

import numpy as np

from . import codec as codec_mod
from .codec import CodecId

MAGIC = b"PCF1"
FORMAT_VERSION = 1
HEADER_SIZE = 26
INDEX_ENTRY_SIZE = 16
DEFAULT_PAGE_SIZE = 65536

_HEADER = struct.Struct("<4sBBIQQ")
_INDEX_ENTRY = struct.Struct("<QII")

U32 = "u32"
RAW_BYTES = "raw-bytes"


class StorageError(Exception):
    """Column file violates the format or an I/O operation failed."""


class CatalogError(Exception):
    """Catalog file is malformed or an entry is missing."""


@dataclass(frozen=True)
class CatalogEntry:
    table: str
    column: str
    logical_type: str  # u32 | raw-bytes
    codec: CodecId
    path: str  # relative to the catalog directory
    values_per_page: int
    total_values: int
    compressed_file_size: int  # true on-disk size
    uncompressed_size: int

    @property
    def total_pages(self) -> int:
        return -(-self.total_values // self.values_per_page)


@dataclass(frozen=True)
class PageRef:
    table: str
    column: str
    page_no: int


@dataclass(frozen=True)
class CompressedPayload:
    codec: CodecId
    value_count: int
    data: bytes


@dataclass
class CompressionReport:
    entry: CatalogEntry
    seconds: float
    input_bytes: int
    output_bytes: int


def _fsync_file(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


# --- writers ------------------------------------------------------------------


class _PageWriter:
    """Single-pass writer: reserve header+index, append pages, backpatch."""

    def __init__(self, path: Path, codec_id: CodecId, values_per_page: int, total_pages: int):
        self.path = Path(path)
        self.codec_id = codec_id
        self.values_per_page = values_per_page
        self.total_pages = total_pages
        self.entries: list[tuple[int, int, int]] = []
        self.total_values = 0
        self.file = open(self.path, "wb")
        self.file.write(b"\x00" * (HEADER_SIZE + INDEX_ENTRY_SIZE * total_pages))

    def add_page(self, body: bytes, value_count: int) -> None:
        offset = self.file.tell()
        self.file.write(body)
        self.entries.append((offset, len(body), value_count))
        self.total_values += value_count

    def finish(self) -> int:
        if len(self.entries) != self.total_pages:
            raise StorageError(
                "wrote %d pages, declared %d" % (len(self.entries), self.total_pages)
            )
        self.file.seek(0)
        self.file.write(
            _HEADER.pack(
                MAGIC,
                FORMAT_VERSION,
                int(self.codec_id),
                self.values_per_page,
                self.total_pages,
                self.total_values,
            )
        )
        for entry in self.entries:
            self.file.write(_INDEX_ENTRY.pack(*entry))
        self.file.flush()
        os.fsync(self.file.fileno())
        self.file.close()
        return self.path.stat().st_size


def write_column(
    values,
    codec: CodecId,
    page_size_bytes: int,
    path,
    table: str | None = None,
    column: str | None = None,
) -> CatalogEntry:
    """Write a u32 column; each page body is compress_values over its slice."""
    if page_size_bytes <= 0 or page_size_bytes % 4:
        raise StorageError("page size must be a positive multiple of 4")
    path = Path(path)
    if table is None or column is None:
        parts = path.name.split(".")
        if len(parts) < 3:
            raise StorageError("cannot derive table/column from %r" % path.name)
        table = table or parts[0]
        column = column or parts[1]
    values = np.asarray(values, dtype=np.uint32)
    values_per_page = page_size_bytes // 4
    total_pages = -(-len(values) // values_per_page)
    writer = _PageWriter(path, codec, values_per_page, total_pages)
    for p in range(total_pages):
        chunk = values[p * values_per_page : (p + 1) * values_per_page]
        writer.add_page(codec_mod.compress_values(codec, chunk), len(chunk))
    size = writer.finish()
    return CatalogEntry(
        table=table,
        column=column,
        logical_type=U32,
        codec=codec,
        path=path.name,
        values_per_page=values_per_page,
        total_values=len(values),
        compressed_file_size=size,
        uncompressed_size=4 * len(values),
    )


def encode_string_page(strings: list[bytes]) -> bytes:
    lengths = [len(s) for s in strings]
    offsets = np.zeros(len(strings) + 1, dtype="<u4")
    np.cumsum(lengths, out=offsets[1:])
    return (
        struct.pack("<I", len(strings)) + offsets.tobytes() + b"".join(strings)
    )


def parse_string_page(body: bytes) -> np.ndarray:
    """Decode a slot-directory page into a fixed-width bytes array."""
    if len(body) < 4:
        raise StorageError("string page shorter than its count field")
    (count,) = struct.unpack_from("<I", body)
    dir_end = 4 + 4 * (count + 1)
    if len(body) < dir_end:
        raise StorageError("string page directory truncated")
    offsets = np.frombuffer(body, dtype="<u4", count=count + 1, offset=4).astype(np.int64)
    payload = body[dir_end:]
    if offsets[0] != 0 or offsets[-1] != len(payload) or np.any(np.diff(offsets) < 0):
        raise StorageError("string page directory inconsistent")
    width = max(1, int(np.diff(offsets).max())) if count else 1
    out = np.zeros(count, dtype="S%d" % width)
    for i in range(count):
        out[i] = payload[offsets[i] : offsets[i + 1]]
    return out


def write_string_column(
    strings: list[bytes],
    page_size_bytes: int,
    path,
    table: str | None = None,
    column: str | None = None,
) -> CatalogEntry:
    """Write a raw-bytes column as Raw slot-directory pages.

    values_per_page matches u32 columns (page_size/4 slots) so all
    columns of a table share one page numbering.
    """
    if page_size_bytes <= 0 or page_size_bytes % 4:
        raise StorageError("page size must be a positive multiple of 4")
    path = Path(path)
    if table is None or column is None:
        parts = path.name.split(".")
        if len(parts) < 3:
            raise StorageError("cannot derive table/column from %r" % path.name)
        table = table or parts[0]
        column = column or parts[1]
    values_per_page = page_size_bytes // 4
    total_pages = -(-len(strings) // values_per_page)
    writer = _PageWriter(path, CodecId.Raw, values_per_page, total_pages)
    body_bytes = 0
    for p in range(total_pages):
        chunk = strings[p * values_per_page : (p + 1) * values_per_page]
        body = encode_string_page(chunk)
        body_bytes += len(body)
        writer.add_page(body, len(chunk))
    size = writer.finish()
    return CatalogEntry(
        table=table,
        column=column,
        logical_type=RAW_BYTES,
        codec=CodecId.Raw,
        path=path.name,
        values_per_page=values_per_page,
        total_values=len(strings),
        compressed_file_size=size,
        uncompressed_size=body_bytes,
    )


# --- readers ------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnFileHeader:
    codec: CodecId
    values_per_page: int
    total_pages: int
    total_values: int


class ColumnFile:
    """Open column file; reads use pread so no locking is needed."""

    def __init__(self, path):
        self.path = Path(path)
        self.fd = os.open(self.path, os.O_RDONLY)
        try:
            head = os.pread(self.fd, HEADER_SIZE, 0)
            if len(head) != HEADER_SIZE:
                raise StorageError("%s: truncated header" % self.path)
            magic, version, codec_byte, vpp, pages, values = _HEADER.unpack(head)
            if magic != MAGIC:
                raise StorageError("%s: bad magic %r" % (self.path, magic))
            if version != FORMAT_VERSION:
                raise StorageError("%s: unsupported format version %d" % (self.path, version))
            try:
                codec_id = CodecId.from_wire(codec_byte)
            except ValueError as exc:
                raise StorageError("%s: %s" % (self.path, exc)) from None
            if vpp <= 0:
                raise StorageError("%s: non-positive values_per_page" % self.path)
            self.header = ColumnFileHeader(codec_id, vpp, pages, values)
            raw_index = os.pread(self.fd, INDEX_ENTRY_SIZE * pages, HEADER_SIZE)
            if len(raw_index) != INDEX_ENTRY_SIZE * pages:
                raise StorageError("%s: truncated page index" % self.path)
            index = np.frombuffer(raw_index, dtype=np.dtype([("offset", "<u8"), ("len", "<u4"), ("count", "<u4")]))
            self.offsets = index["offset"].astype(np.int64)
            self.lengths = index["len"].astype(np.int64)
            self.counts = index["count"].astype(np.int64)
            self._validate_index()
        except Exception:
            os.close(self.fd)
            raise

    def _validate_index(self) -> None:
        h = self.header
        if int(self.counts.sum()) != h.total_values:
            raise StorageError("%s: index value counts disagree with header" % self.path)
        if h.total_pages == 0:
            return
        if np.any(self.counts[:-1] != h.values_per_page) or not (
            0 < self.counts[-1] <= h.values_per_page
        ):
            raise StorageError("%s: page value counts not uniform" % self.path)
        data_start = HEADER_SIZE + INDEX_ENTRY_SIZE * h.total_pages
        ends = self.offsets + self.lengths
        if self.offsets[0] < data_start or np.any(self.offsets[1:] < ends[:-1]):
            raise StorageError("%s: page extents overlap" % self.path)

    def read_page_bytes(self, page_no: int) -> CompressedPayload:
        if not 0 <= page_no < self.header.total_pages:
            raise StorageError(
                "%s: page %d out of range (0..%d)" % (self.path, page_no, self.header.total_pages - 1)
            )
        length = int(self.lengths[page_no])
        data = os.pread(self.fd, length, int(self.offsets[page_no]))
        if len(data) != length:
            raise StorageError("%s: short read on page %d" % (self.path, page_no))
        return CompressedPayload(self.header.codec, int(self.counts[page_no]), data)

    def close(self) -> None:
        if self.fd >= 0:
            os.close(self.fd)
            self.fd = -1


def read_page_bytes(file: ColumnFile, page_no: int) -> CompressedPayload:
    return file.read_page_bytes(page_no)


def read_column_values(path, logical_type: str = U32):
    """Load a whole column into memory (tooling path, not the engine's)."""
    f = ColumnFile(path)
    try:
        if logical_type == U32:
            parts = [
                codec_mod.decompress_values(f.header.codec, p.data, p.value_count)
                for p in (f.read_page_bytes(i) for i in range(f.header.total_pages))
            ]
            if not parts:
                return np.zeros(0, dtype=np.uint32)
            return np.concatenate(parts)
        pieces: list[bytes] = []
        for i in range(f.header.total_pages):
            page = parse_string_page(f.read_page_bytes(i).data)
            pieces.extend(bytes(s) for s in page)
        return pieces
    finally:
        f.close()


# --- catalog ------------------------------------------------------------------

CATALOG_NAME = "catalog.txt"
_CATALOG_FIELDS = 9


class Catalog:
    """Physical parameters of all column files in a dataset directory."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.entries: dict[tuple[str, str], CatalogEntry] = {}

    def add(self, entry: CatalogEntry) -> None:
        self.entries[(entry.table, entry.column)] = entry

    def get(self, table: str, column: str) -> CatalogEntry:
        try:
            return self.entries[(table, column)]
        except KeyError:
            raise CatalogError("unknown column %s.%s" % (table, column)) from None

    def has(self, table: str, column: str) -> bool:
        return (table, column) in self.entries

    def tables(self) -> list[str]:
        seen: list[str] = []
        for table, _ in self.entries:
            if table not in seen:
                seen.append(table)
        return seen

    def columns_of(self, table: str) -> list[CatalogEntry]:
        return [e for (t, _), e in self.entries.items() if t == table]

    def row_count(self, table: str) -> int:
        cols = self.columns_of(table)
        if not cols:
            raise CatalogError("unknown table %s" % table)
        counts = {e.total_values for e in cols}
        if len(counts) != 1:
            raise CatalogError("table %s columns disagree on row count" % table)
        return counts.pop()

    def file_path(self, entry: CatalogEntry) -> Path:
        return self.directory / entry.path


def save_catalog(catalog: Catalog, path=None) -> Path:
    path = Path(path) if path else catalog.directory / CATALOG_NAME
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write("# colcrunch catalog: one column per line, tab-separated\n")
        f.write("# table column type codec path values_per_page total_values file_size uncompressed_size\n")
        for entry in catalog.entries.values():
            f.write(
                "\t".join(
                    [
                        entry.table,
                        entry.column,
                        entry.logical_type,
                        codec_mod.codec_name(entry.codec),
                        entry.path,
                        str(entry.values_per_page),
                        str(entry.total_values),
                        str(entry.compressed_file_size),
                        str(entry.uncompressed_size),
                    ]
                )
                + "\n"
            )
    _fsync_file(tmp)
    os.replace(tmp, path)
    return path


def load_catalog(path) -> Catalog:
    path = Path(path)
    if path.is_dir():
        path = path / CATALOG_NAME
    if not path.exists():
        raise CatalogError("no catalog at %s" % path)
    catalog = Catalog(path.parent)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != _CATALOG_FIELDS:
                raise CatalogError(
                    "%s line %d: expected %d fields, got %d"
                    % (path, lineno, _CATALOG_FIELDS, len(fields))
                )
            table, column, logical_type, codec_name, rel, vpp, totals, fsize, usize = fields
            if logical_type not in (U32, RAW_BYTES):
                raise CatalogError("%s line %d: unknown type %r" % (path, lineno, logical_type))
            try:
                codec_id = codec_mod.codec_from_name(codec_name)
            except ValueError as exc:
                raise CatalogError("%s line %d: %s" % (path, lineno, exc)) from None
            try:
                entry = CatalogEntry(
                    table, column, logical_type, codec_id, rel,
                    int(vpp), int(totals), int(fsize), int(usize),
                )
            except ValueError:
                raise CatalogError("%s line %d: non-integer field" % (path, lineno)) from None
            catalog.add(entry)
    return catalog


# --- offline compression tool ---------------------------------------------------


def compress_existing_column(
    catalog: Catalog, table: str, column: str, codec: CodecId
) -> CompressionReport:
    """Recompress a Raw column in place and update the catalog atomically."""
    entry = catalog.get(table, column)
    if entry.codec != CodecId.Raw:
        raise StorageError("%s.%s is already compressed (%s)" % (table, column, entry.codec.name))
    if entry.logical_type != U32 and codec != CodecId.Raw:
        raise StorageError(
            "%s.%s holds raw bytes; only u32 columns can be codec-compressed" % (table, column)
        )
    src_path = catalog.file_path(entry)
    page_size = entry.values_per_page * 4
    if entry.logical_type != U32:
        return CompressionReport(entry, 0.0, entry.uncompressed_size, entry.compressed_file_size)
    values = read_column_values(src_path, U32)
    tmp_path = src_path.with_name(src_path.name + ".tmp")
    start = time.monotonic()
    new_entry = write_column(values, codec, page_size, tmp_path, table=table, column=column)
    seconds = time.monotonic() - start
    _fsync_file(tmp_path)
    os.replace(tmp_path, src_path)
    new_entry = replace(new_entry, path=entry.path)
    catalog.add(new_entry)
    save_catalog(catalog)
    return CompressionReport(
        entry=new_entry,
        seconds=seconds,
        input_bytes=entry.uncompressed_size,
        output_bytes=new_entry.compressed_file_size,
    )


# --- stats ----------------------------------------------------------------------


def data_region_bytes(entry: CatalogEntry) -> int:
    """On-disk page bytes, excluding the fixed header and index."""
    return entry.compressed_file_size - HEADER_SIZE - INDEX_ENTRY_SIZE * entry.total_pages


def column_stats(catalog: Catalog) -> list[dict]:
    """Per-column size stats plus the two aggregate rows.

    'over-integer-columns' sums the u32 columns (the compressible
    set); 'whole-table' sums everything, strings included. Ratio is
    uncompressed/compressed over page data bytes, so an uncompressed
    Raw column reports exactly 1.0.
    """
    rows: list[dict] = []
    int_comp = int_unc = all_comp = all_unc = 0
    for entry in catalog.entries.values():
        compressed = data_region_bytes(entry)
        rows.append(
            {
                "table": entry.table,
                "column": entry.column,
                "codec": codec_mod.codec_name(entry.codec),
                "compressed_bytes": compressed,
                "uncompressed_bytes": entry.uncompressed_size,
                "ratio": entry.uncompressed_size / compressed if compressed else 1.0,
            }
        )
        all_comp += compressed
        all_unc += entry.uncompressed_size
        if entry.logical_type == U32:
            int_comp += compressed
            int_unc += entry.uncompressed_size
    for name, comp, unc in (
        ("over-integer-columns", int_comp, int_unc),
        ("whole-table", all_comp, all_unc),
    ):
        rows.append(
            {
                "table": "*",
                "column": name,
                "codec": "-",
                "compressed_bytes": comp,
                "uncompressed_bytes": unc,
                "ratio": unc / comp if comp else 1.0,
            }
        )
    return rows


# --- store: shared open-file table ------------------------------------------------


class ColumnStore:
    """Catalog plus lazily opened column files, shared across threads."""

    def __init__(self, catalog: Catalog):
        self.catalog = catalog
        self._files: dict[tuple[str, str], ColumnFile] = {}
        self._lock = Lock()

    def file(self, table: str, column: str) -> ColumnFile:
        key = (table, column)
        with self._lock:
            f = self._files.get(key)
            if f is None:
                f = ColumnFile(self.catalog.file_path(self.catalog.get(table, column)))
                self._files[key] = f
            return f

    def entry(self, table: str, column: str) -> CatalogEntry:
        return self.catalog.get(table, column)

    def read_page(self, ref: PageRef) -> CompressedPayload:
        return self.file(ref.table, ref.column).read_page_bytes(ref.page_no)

    def close(self) -> None:
        with self._lock:
            for f in self._files.values():
                f.close()
            self._files.clear()
