"""Figure rendering: fixed-order bar charts from a loaded SummaryTable.

Figures are views of the CSV values; the only arithmetic is the stack sum
that places a segment on top of another and unit scaling to gigabytes.
Every ordering, color, and rcParam comes from style.py / report.mplstyle,
so rendering the same table twice produces byte-identical files.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ssbreport.style import (
    CODEC_COLORS,
    CODEC_LABELS,
    CODEC_ORDER,
    SCENARIO_ORDER,
    STYLE_FILE,
    ordered,
)
from ssbreport.tables import SummaryTable

GIGABYTE = 1e9
LOG_SCALE_SPREAD = 100.0  # value axis goes logarithmic past this max/min ratio
WHISKER_STYLE = {"fmt": "none", "ecolor": "#222222", "elinewidth": 0.7, "capsize": 1.5}


def _slot_offsets(n: int):
    """Center offsets and width for n grouped bars within one x unit."""
    width = 0.8 / n
    return [-0.4 + width * (j + 0.5) for j in range(n)], width


def _codec_color(codec: str) -> str:
    return CODEC_COLORS.get(codec, "#333333")


def _codec_label(codec: str) -> str:
    return CODEC_LABELS.get(codec, codec)


def _no_data(ax) -> None:
    ax.grid(False)
    ax.set_xticks(())
    ax.set_yticks(())
    ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)


def _size_layout(table: SummaryTable):
    """Column order (first seen) and codec slots for the size figures."""
    columns: list[tuple[str, str]] = []
    for row in table.sizes:
        key = (row.table, row.column)
        if key not in columns:
            columns.append(key)
    codecs = ordered({row.codec for row in table.sizes}, CODEC_ORDER)
    return columns, codecs


def _finish_column_axis(ax, columns) -> None:
    ax.set_xticks(range(len(columns)))
    ax.set_xticklabels(["%s.%s" % c for c in columns], rotation=45, ha="right")
    ax.legend()


def draw_compression_time(ax, table: SummaryTable) -> int:
    """Per-column compression time bars; zero times are gaps, not bars."""
    columns, codecs = _size_layout(table)
    values = {(r.codec, r.table, r.column): r.compress_seconds for r in table.sizes}
    if not columns:
        return 0
    offsets, width = _slot_offsets(len(codecs))
    drawn: list[float] = []
    for j, codec in enumerate(codecs):
        xs, ys = [], []
        for i, key in enumerate(columns):
            v = values.get((codec,) + key)
            if v is None or v <= 0.0:
                continue
            xs.append(i + offsets[j])
            ys.append(v)
        if xs:
            ax.bar(xs, ys, width=width, color=_codec_color(codec), label=_codec_label(codec))
            drawn.extend(ys)
    if not drawn:
        return 0
    if max(drawn) / min(drawn) > LOG_SCALE_SPREAD:
        ax.set_yscale("log")
    ax.set_ylabel("compression time (seconds)")
    _finish_column_axis(ax, columns)
    return len(drawn)


def draw_compressed_sizes(ax, table: SummaryTable) -> int:
    columns, codecs = _size_layout(table)
    values = {(r.codec, r.table, r.column): r.compressed_bytes for r in table.sizes}
    if not columns:
        return 0
    offsets, width = _slot_offsets(len(codecs))
    count = 0
    for j, codec in enumerate(codecs):
        xs, ys = [], []
        for i, key in enumerate(columns):
            v = values.get((codec,) + key)
            if v is None:
                continue
            xs.append(i + offsets[j])
            ys.append(v / GIGABYTE)
        if xs:
            ax.bar(xs, ys, width=width, color=_codec_color(codec), label=_codec_label(codec))
            count += len(xs)
    if not count:
        return 0
    ax.set_ylabel("compressed size (gigabytes)")
    _finish_column_axis(ax, columns)
    return count


def _stacked_by_query(ax, table, scenario, bottom_of, top_of, whisker_of):
    """Grouped stacked bars: solid bottom segment, hatched top segment."""
    queries = table.query_ids(scenario)
    codecs = table.codecs(scenario)
    if not queries:
        return 0
    offsets, width = _slot_offsets(len(codecs))
    count = 0
    for j, codec in enumerate(codecs):
        xs, lows, highs, cis = [], [], [], []
        for i, qid in enumerate(queries):
            row = table.get(scenario, codec, qid)
            if row is None:
                continue
            xs.append(i + offsets[j])
            lows.append(bottom_of(row))
            highs.append(top_of(row))
            cis.append(whisker_of(row))
        if not xs:
            continue
        color = _codec_color(codec)
        ax.bar(xs, lows, width=width, color=color, label=_codec_label(codec))
        ax.bar(xs, highs, width=width, bottom=lows, color=color, alpha=0.45, hatch="///")
        tops = [a + b for a, b in zip(lows, highs)]
        ax.errorbar(xs, tops, yerr=cis, **WHISKER_STYLE)
        count += len(xs)
    if not count:
        return 0
    ax.set_xticks(range(len(queries)))
    ax.set_xticklabels(queries, rotation=45, ha="right")
    ax.legend()
    return count


def draw_runtime(ax, table: SummaryTable, scenario: str) -> int:
    """Plan time (solid) stacked under data-access time (hatched), ci95 whisker."""
    count = _stacked_by_query(
        ax,
        table,
        scenario,
        bottom_of=lambda r: r.plan_mean,
        top_of=lambda r: r.data_access_mean,
        whisker_of=lambda r: r.wall_ci95,
    )
    if count:
        ax.set_ylabel("run time (seconds)")
    return count


def draw_io_breakdown(ax, table: SummaryTable, scenario: str) -> int:
    """I/O thread read time (solid) stacked under decompression (hatched)."""
    count = _stacked_by_query(
        ax,
        table,
        scenario,
        bottom_of=lambda r: r.io_read_mean,
        top_of=lambda r: r.io_decompress_mean,
        whisker_of=lambda r: 0.0,
    )
    if count:
        ax.set_ylabel("I/O thread time (seconds)")
    return count


def draw_bytes_read(ax, table: SummaryTable, scenario: str) -> int:
    queries = table.query_ids(scenario)
    codecs = table.codecs(scenario)
    if not queries:
        return 0
    offsets, width = _slot_offsets(len(codecs))
    count = 0
    for j, codec in enumerate(codecs):
        xs, ys = [], []
        for i, qid in enumerate(queries):
            row = table.get(scenario, codec, qid)
            if row is None:
                continue
            xs.append(i + offsets[j])
            ys.append(row.bytes_read_mean / GIGABYTE)
        if xs:
            ax.bar(xs, ys, width=width, color=_codec_color(codec), label=_codec_label(codec))
            count += len(xs)
    if not count:
        return 0
    ax.set_ylabel("data read (gigabytes)")
    ax.set_xticks(range(len(queries)))
    ax.set_xticklabels(queries, rotation=45, ha="right")
    ax.legend()
    return count


def _figure_specs(table: SummaryTable):
    """(file stem, title, drawer) for the six figures, fixed order."""
    scenarios = table.scenarios()
    io_scenario = scenarios[0] if scenarios else SCENARIO_ORDER[0]
    return (
        (
            "compression-time",
            "per-column compression time",
            lambda ax: draw_compression_time(ax, table),
        ),
        (
            "compressed-sizes",
            "per-column compressed sizes",
            lambda ax: draw_compressed_sizes(ax, table),
        ),
        (
            "runtime-sequential",
            "sequential run time (plan solid, data access hatched)",
            lambda ax: draw_runtime(ax, table, "sequential"),
        ),
        (
            "runtime-parallel",
            "parallel run time (plan solid, data access hatched)",
            lambda ax: draw_runtime(ax, table, "parallel"),
        ),
        (
            "io-breakdown",
            "I/O thread actions, %s (read solid, decompress hatched)" % io_scenario,
            lambda ax: draw_io_breakdown(ax, table, io_scenario),
        ),
        (
            "bytes-read",
            "data read per query, %s" % io_scenario,
            lambda ax: draw_bytes_read(ax, table, io_scenario),
        ),
    )


def render_figures(table: SummaryTable, out_dir) -> list[Path]:
    """Render the six figures plus the combined page into out_dir as SVG."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = _figure_specs(table)
    paths = []
    with plt.rc_context(fname=STYLE_FILE):
        for stem, title, drawer in specs:
            fig, ax = plt.subplots(figsize=(7.5, 4.2))
            ax.set_title(title)
            if not drawer(ax):
                _no_data(ax)
            fig.tight_layout()
            path = out / ("%s.svg" % stem)
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
        fig, axes = plt.subplots(3, 2, figsize=(15, 13))
        for (stem, title, drawer), ax in zip(specs, axes.flat):
            ax.set_title(title)
            if not drawer(ax):
                _no_data(ax)
        fig.tight_layout()
        page = out / "report-page.svg"
        fig.savefig(page, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(page)
    return paths
