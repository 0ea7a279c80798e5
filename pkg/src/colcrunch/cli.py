"""Command-line interface.

Subcommands:

  gen       generate a benchmark dataset (Raw columns + catalog)
  compress  re-encode the fact table's integer columns with a codec
  bench     run a measurement scenario and write CSV outputs
  stats     print per-column size statistics for a dataset
  export    write a per-column sizes CSV (feeds the report tooling)

The dataset directory comes from --data-dir or the COLCRUNCH_DATA_DIR
environment variable.  Exit codes: 0 success, 1 operational failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import os
import shutil
import sys
from pathlib import Path

from . import bench as bench_mod
from . import codec as codec_mod
from . import queries, ssb, storage

COMPRESS_LOG_NAME = "compress_log.txt"
LOG_FIELDS = (
    "timestamp",
    "codec",
    "algorithm",
    "table",
    "column",
    "compress_seconds",
    "input_bytes",
    "output_bytes",
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


class CliError(Exception):
    pass


def _data_dir(args) -> Path:
    if args.data_dir:
        return Path(args.data_dir)
    env = os.environ.get("COLCRUNCH_DATA_DIR")
    if env:
        return Path(env)
    raise CliError("no dataset directory: pass --data-dir or set COLCRUNCH_DATA_DIR")


def _add_data_dir(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data-dir", help="dataset directory (default: $COLCRUNCH_DATA_DIR)")


def cmd_gen(args) -> int:
    out = _data_dir(args)
    if out.exists() and any(out.iterdir()):
        if not args.force:
            raise CliError("directory %s is not empty (use --force to replace)" % out)
        shutil.rmtree(out)
    catalog = ssb.generate_dataset(args.sf, args.seed, out, page_size_bytes=args.page_size)
    rows = {t: catalog.row_count(t) for t in catalog.tables()}
    print("generated dataset in %s (sf=%g, seed=%d)" % (out, args.sf, args.seed))
    for table in sorted(rows):
        print("  %-10s %10d rows" % (table, rows[table]))
    return 0


def cmd_compress(args) -> int:
    data_dir = _data_dir(args)
    codec_id = codec_mod.codec_from_name(args.codec)
    catalog = storage.load_catalog(data_dir)
    columns = (
        [c.strip() for c in args.columns.split(",") if c.strip()]
        if args.columns
        else list(ssb.LINEORDER_U32_COLUMNS)
    )
    log_path = data_dir / COMPRESS_LOG_NAME
    new_log = not log_path.exists()
    with open(log_path, "a", newline="") as log:
        w = csv.writer(log)
        if new_log:
            w.writerow(LOG_FIELDS)
        for column in columns:
            report = storage.compress_existing_column(catalog, args.table, column, codec_id)
            ratio = report.input_bytes / report.output_bytes if report.output_bytes else 1.0
            print(
                "%s.%s: %s %d -> %d bytes (%.2fx) in %.3fs"
                % (args.table, column, args.codec, report.input_bytes,
                   report.output_bytes, ratio, report.seconds)
            )
            w.writerow(
                [
                    datetime.datetime.now().isoformat(timespec="seconds"),
                    args.codec,
                    codec_mod.algorithm_name(codec_id),
                    args.table,
                    column,
                    "%.6f" % report.seconds,
                    report.input_bytes,
                    report.output_bytes,
                ]
            )
    return 0


def _infer_codec_label(catalog: storage.Catalog) -> str:
    names = {
        codec_mod.codec_name(catalog.get("lineorder", c).codec)
        for c in ssb.LINEORDER_U32_COLUMNS
        if catalog.has("lineorder", c)
    }
    if len(names) != 1:
        raise CliError(
            "fact-table integer columns carry mixed codecs %s; pass --codec explicitly"
            % sorted(names)
        )
    return names.pop()


def cmd_bench(args) -> int:
    data_dir = _data_dir(args)
    catalog = storage.load_catalog(data_dir)
    label = args.codec or _infer_codec_label(catalog)
    config = bench_mod.BenchConfig(
        data_dir=data_dir,
        codec=label,
        scenario=args.scenario,
        iterations=args.iterations,
        capacity_pages=args.buffer_pages,
        io_threads=args.io_threads,
        worker_threads=args.workers,
        prefetch_window=args.prefetch_window,
        seed=args.seed,
        drop_caches_cmd=args.drop_caches_cmd,
        simd=(args.simd == "on"),
    )
    result = bench_mod.run_iterations(config)
    paths = bench_mod.write_outputs(result, args.out_dir)
    print(
        "recorded %d measurements (%s, codec=%s, %d iterations)"
        % (len(result.records), args.scenario, label, args.iterations)
    )
    for name in ("measurements", "summary", "meta"):
        print("  %s" % paths[name])
    for warning in result.warnings:
        print("warning: %s" % warning, file=sys.stderr)
    return 0


def cmd_stats(args) -> int:
    data_dir = _data_dir(args)
    catalog = storage.load_catalog(data_dir)
    rows = storage.column_stats(catalog)
    fmt = "%-12s %-16s %-12s %14s %14s %8s"
    print(fmt % ("table", "column", "codec", "compressed", "uncompressed", "ratio"))
    for row in rows:
        print(
            fmt
            % (
                row["table"],
                row["column"],
                row["codec"],
                row["compressed_bytes"],
                row["uncompressed_bytes"],
                "%.2f" % row["ratio"],
            )
        )
    return 0


def _read_compress_log(data_dir: Path) -> dict[tuple[str, str, str], dict]:
    """Latest log line per (codec, table, column)."""
    log_path = data_dir / COMPRESS_LOG_NAME
    latest: dict[tuple[str, str, str], dict] = {}
    if not log_path.exists():
        return latest
    with open(log_path, newline="") as f:
        for row in csv.DictReader(f):
            latest[(row["codec"], row["table"], row["column"])] = row
    return latest


def cmd_export(args) -> int:
    data_dir = _data_dir(args)
    catalog = storage.load_catalog(data_dir)
    log = _read_compress_log(data_dir)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    new_file = not (args.append and out.exists())
    with open(out, "a" if args.append else "w", newline="") as f:
        w = csv.writer(f)
        if new_file:
            w.writerow(SIZES_FIELDS)
        for entry in catalog.entries.values():
            if entry.table != "lineorder" or entry.logical_type != storage.U32:
                continue
            name = codec_mod.codec_name(entry.codec)
            logged = log.get((name, entry.table, entry.column))
            w.writerow(
                [
                    name,
                    codec_mod.algorithm_name(entry.codec),
                    entry.table,
                    entry.column,
                    logged["compress_seconds"] if logged else "0.0",
                    storage.data_region_bytes(entry),
                    entry.uncompressed_size,
                ]
            )
    print("wrote %s" % out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colcrunch", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset")
    _add_data_dir(p)
    p.add_argument("--sf", type=float, default=0.1, help="scale factor (default 0.1)")
    p.add_argument("--seed", type=int, default=5, help="generator seed (default 5)")
    p.add_argument("--page-size", type=int, default=storage.DEFAULT_PAGE_SIZE)
    p.add_argument("--force", action="store_true", help="replace an existing dataset")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("compress", help="re-encode integer columns")
    _add_data_dir(p)
    p.add_argument("--codec", required=True, choices=sorted(codec_mod.CODEC_NAMES))
    p.add_argument("--table", default="lineorder")
    p.add_argument("--columns", help="comma-separated list (default: fact integer columns)")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("bench", help="run a measurement scenario")
    _add_data_dir(p)
    p.add_argument("--out-dir", default="./results")
    p.add_argument("--codec", help="codec label (default: inferred from the catalog)")
    p.add_argument("--scenario", choices=bench_mod.SCENARIOS, default="sequential")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--buffer-pages", type=int, default=16384)
    p.add_argument("--io-threads", type=int, default=2)
    p.add_argument("--workers", type=int, help="parallel worker count (default: query count)")
    p.add_argument("--prefetch-window", type=int, default=4)
    p.add_argument("--drop-caches-cmd", help="shell command run between iterations")
    p.add_argument("--simd", choices=("on", "off"), default="on")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="print per-column size statistics")
    _add_data_dir(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("export", help="write the per-column sizes CSV")
    _add_data_dir(p)
    p.add_argument("--out", required=True)
    p.add_argument("--append", action="store_true", help="append to an existing CSV")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        CliError,
        bench_mod.BenchError,
        ssb.GenError,
        queries.QueryError,
        storage.StorageError,
        storage.CatalogError,
        codec_mod.CodecError,
        ValueError,
        OSError,
    ) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
