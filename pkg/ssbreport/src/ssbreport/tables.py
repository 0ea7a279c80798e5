"""Typed loading of the benchmark summary and sizes CSVs.

The schemas are the producer's documented output contract, duplicated here
verbatim; this package never imports engine code.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

from ssbreport.style import CODEC_ORDER, QUERY_ORDER, SCENARIO_ORDER, ordered

SUMMARY_FIELDS = (
    "query_id",
    "codec",
    "scenario",
    "n",
    "wall_mean",
    "wall_ci95",
    "plan_mean",
    "plan_ci95",
    "data_access_mean",
    "data_access_ci95",
    "io_read_mean",
    "io_read_ci95",
    "io_decompress_mean",
    "io_decompress_ci95",
    "bytes_read_mean",
    "pages_loaded_mean",
)

SIZES_FIELDS = (
    "codec",
    "algorithm",
    "table",
    "column",
    "compress_seconds",
    "compressed_bytes",
    "uncompressed_bytes",
)


class SchemaError(ValueError):
    """A CSV does not match the documented schema."""


@dataclass(frozen=True)
class SummaryRow:
    query_id: str
    codec: str
    scenario: str
    n: int
    wall_mean: float
    wall_ci95: float
    plan_mean: float
    plan_ci95: float
    data_access_mean: float
    data_access_ci95: float
    io_read_mean: float
    io_read_ci95: float
    io_decompress_mean: float
    io_decompress_ci95: float
    bytes_read_mean: float
    pages_loaded_mean: float


@dataclass(frozen=True)
class SizeRow:
    codec: str
    algorithm: str
    table: str
    column: str
    compress_seconds: float
    compressed_bytes: int
    uncompressed_bytes: int


@dataclass
class SummaryTable:
    """Summary rows keyed by (scenario, codec, query_id) plus size rows."""

    rows: dict[tuple[str, str, str], SummaryRow] = field(default_factory=dict)
    sizes: list[SizeRow] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not self.rows and not self.sizes

    def get(self, scenario: str, codec: str, query_id: str) -> SummaryRow | None:
        return self.rows.get((scenario, codec, query_id))

    def scenarios(self) -> list[str]:
        return ordered({k[0] for k in self.rows}, SCENARIO_ORDER)

    def codecs(self, scenario: str | None = None) -> list[str]:
        keys = self.rows if scenario is None else {k for k in self.rows if k[0] == scenario}
        return ordered({k[1] for k in keys}, CODEC_ORDER)

    def query_ids(self, scenario: str | None = None) -> list[str]:
        keys = self.rows if scenario is None else {k for k in self.rows if k[0] == scenario}
        return ordered({k[2] for k in keys}, QUERY_ORDER)


def _check_header(found: list[str], expected: tuple[str, ...], path: Path) -> None:
    if list(found) == list(expected):
        return
    for i, want in enumerate(expected):
        if i >= len(found):
            raise SchemaError("%s: missing column %r" % (path, want))
        if found[i] != want:
            raise SchemaError(
                "%s: expected column %d to be %r, found %r" % (path, i + 1, want, found[i])
            )
    raise SchemaError("%s: unexpected extra column %r" % (path, found[len(expected)]))


def _read_rows(path: Path, expected: tuple[str, ...]):
    """Yields (line_number, fields) for each data row after header checks."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("%s: empty file, expected a header row" % path) from None
        _check_header(header, expected, path)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise SchemaError(
                    "%s line %d: expected %d fields, found %d"
                    % (path, line_no, len(expected), len(row))
                )
            yield line_no, row


def _load_summary_rows(path: Path) -> dict[tuple[str, str, str], SummaryRow]:
    rows: dict[tuple[str, str, str], SummaryRow] = {}
    for line_no, raw in _read_rows(path, SUMMARY_FIELDS):
        try:
            row = SummaryRow(
                query_id=raw[0],
                codec=raw[1],
                scenario=raw[2],
                n=int(raw[3]),
                wall_mean=float(raw[4]),
                wall_ci95=float(raw[5]),
                plan_mean=float(raw[6]),
                plan_ci95=float(raw[7]),
                data_access_mean=float(raw[8]),
                data_access_ci95=float(raw[9]),
                io_read_mean=float(raw[10]),
                io_read_ci95=float(raw[11]),
                io_decompress_mean=float(raw[12]),
                io_decompress_ci95=float(raw[13]),
                bytes_read_mean=float(raw[14]),
                pages_loaded_mean=float(raw[15]),
            )
        except ValueError as exc:
            raise SchemaError("%s line %d: %s" % (path, line_no, exc)) from None
        key = (row.scenario, row.codec, row.query_id)
        if key in rows:
            raise SchemaError(
                "%s line %d: duplicate entry for scenario=%s codec=%s query=%s"
                % (path, line_no, *key)
            )
        rows[key] = row
    return rows


def _load_size_rows(path: Path) -> list[SizeRow]:
    sizes = []
    for line_no, raw in _read_rows(path, SIZES_FIELDS):
        try:
            sizes.append(
                SizeRow(
                    codec=raw[0],
                    algorithm=raw[1],
                    table=raw[2],
                    column=raw[3],
                    compress_seconds=float(raw[4]),
                    compressed_bytes=int(raw[5]),
                    uncompressed_bytes=int(raw[6]),
                )
            )
        except ValueError as exc:
            raise SchemaError("%s line %d: %s" % (path, line_no, exc)) from None
    return sizes


def load_summary(summary_path, sizes_path=None) -> SummaryTable:
    """Load the summary CSV and, when given, the per-column sizes CSV."""
    table = SummaryTable(rows=_load_summary_rows(Path(summary_path)))
    if sizes_path is not None:
        table.sizes = _load_size_rows(Path(sizes_path))
    return table
