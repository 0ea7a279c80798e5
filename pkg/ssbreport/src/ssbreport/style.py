"""Fixed orderings, labels, and colors so rendered figures are reproducible.

Everything a figure's appearance depends on is pinned here or in
report.mplstyle; nothing is derived from input row order.
"""

from pathlib import Path

STYLE_FILE = Path(__file__).with_name("report.mplstyle")

CODEC_ORDER = ("raw", "vbyte", "pfor", "fastpfor128", "binpack128", "brotli")

CODEC_LABELS = {
    "raw": "Raw",
    "vbyte": "VByte",
    "pfor": "PFor",
    "fastpfor128": "FastPFor128",
    "binpack128": "BinaryPacking128",
    "brotli": "Brotli",
}

# one fixed color per codec so a codec keeps its color even when a table
# covers only a subset
CODEC_COLORS = {
    "raw": "#7f7f7f",
    "vbyte": "#1f77b4",
    "pfor": "#2ca02c",
    "fastpfor128": "#ff7f0e",
    "binpack128": "#9467bd",
    "brotli": "#d62728",
}

QUERY_ORDER = (
    "Q1.1", "Q1.2", "Q1.3",
    "Q2.1", "Q2.2", "Q2.3",
    "Q3.1", "Q3.2", "Q3.3", "Q3.4",
    "Q4.1", "Q4.2", "Q4.3",
)

SCENARIO_ORDER = ("sequential", "parallel")


def ordered(present, fixed) -> list[str]:
    """The fixed order restricted to present values; unknowns sort last."""
    known = [v for v in fixed if v in present]
    return known + sorted(set(present) - set(fixed))
