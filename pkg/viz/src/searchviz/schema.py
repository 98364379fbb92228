"""Loading and validation of exported plot-data tables.

The producer writes flat JSON documents {kind, columns, rows, meta}; this
module is the only place that knows what each kind's columns must look like,
so renderers can trust any Table they receive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("unique_per_gen", "mean_progression", "op_frequency", "cache_stats")

_FIXED_COLUMNS = {
    "unique_per_gen": ["generation", "unique_count"],
    "op_frequency": ["operation", "count"],
    "cache_stats": ["generation", "cumulative_samples", "cumulative_unique"],
}
_MEAN_PREFIX = ["generation", "cell", "edge"]


class SchemaError(ValueError):
    """Input does not conform to the exported plot-data schema."""


@dataclass
class Table:
    kind: str
    columns: list[str]
    rows: list[list]
    meta: dict = field(default_factory=dict)
    source: str = "memory"

    @property
    def op_names(self) -> list[str]:
        """Operation names the table mentions; empty for kinds without any."""
        if self.kind == "mean_progression":
            return list(self.columns[len(_MEAN_PREFIX):])
        if self.kind == "op_frequency":
            return [str(row[0]) for row in self.rows]
        return []


def validate(doc, source: str = "memory") -> Table:
    if not isinstance(doc, dict):
        raise SchemaError(f"{source}: plot data must be a JSON object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"{source}: unknown kind {kind!r} (expected one of {KINDS})")
    columns = doc.get("columns")
    rows = doc.get("rows")
    if not isinstance(columns, list) or not all(isinstance(c, str) for c in columns):
        raise SchemaError(f"{source}: 'columns' must be a list of strings")
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise SchemaError(f"{source}: 'rows' must be a list of lists")
    for i, row in enumerate(rows):
        if len(row) != len(columns):
            raise SchemaError(
                f"{source}: row {i} has {len(row)} cells for {len(columns)} columns"
            )
    if kind in _FIXED_COLUMNS:
        if columns != _FIXED_COLUMNS[kind]:
            raise SchemaError(
                f"{source}: {kind} needs columns {_FIXED_COLUMNS[kind]}, got {columns}"
            )
    else:  # mean_progression carries one extra column per operation
        if columns[: len(_MEAN_PREFIX)] != _MEAN_PREFIX or len(columns) <= len(_MEAN_PREFIX):
            raise SchemaError(
                f"{source}: {kind} needs columns {_MEAN_PREFIX} + one per operation"
            )
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise SchemaError(f"{source}: 'meta' must be an object")
    return Table(kind=kind, columns=list(columns), rows=[list(r) for r in rows],
                 meta=dict(meta), source=source)


def load_table(path) -> Table:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: not valid JSON: {err}") from err
    return validate(doc, source=str(path))


def require_kind(table: Table, kind: str) -> Table:
    if table.kind != kind:
        raise SchemaError(
            f"{table.source}: holds {table.kind!r} data, renderer wants {kind!r}"
        )
    return table
