"""Static figure rendering for colcrunch benchmark CSV outputs."""

from ssbreport.tables import SchemaError, SizeRow, SummaryRow, SummaryTable, load_summary
from ssbreport.figures import render_figures

__all__ = [
    "SchemaError",
    "SizeRow",
    "SummaryRow",
    "SummaryTable",
    "load_summary",
    "render_figures",
]
