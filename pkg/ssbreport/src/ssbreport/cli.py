"""Command-line entry: report <summary.csv> [sizes.csv] --out <dir>."""

import argparse
import sys
from pathlib import Path

from ssbreport.figures import render_figures
from ssbreport.tables import SchemaError, load_summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="report",
        description="Render benchmark summary CSVs into static SVG figures.",
    )
    parser.add_argument("summary", help="summary CSV from a benchmark run")
    parser.add_argument("sizes", nargs="?", help="optional per-column sizes CSV")
    parser.add_argument("--out", required=True, help="output directory for figures")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        table = load_summary(args.summary, args.sizes)
        paths = render_figures(table, Path(args.out))
    except (SchemaError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
