"""Figure rendering for exported search plot-data tables."""

from .render import (
    average_unique,
    build_color_map,
    collect_color_map,
    frequency_groups,
    render,
    render_cache,
    render_mean,
    render_opfreq,
    render_unique,
    stack_rows,
)
from .schema import KINDS, SchemaError, Table, load_table, require_kind, validate

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "SchemaError",
    "Table",
    "average_unique",
    "build_color_map",
    "collect_color_map",
    "frequency_groups",
    "load_table",
    "render",
    "render_cache",
    "render_mean",
    "render_opfreq",
    "render_unique",
    "require_kind",
    "stack_rows",
    "validate",
]
