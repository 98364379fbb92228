"""Trace post-processing into plain tabular plot data.

Every function is pure over a Trace and returns a PlotData: a kind tag,
column names, and rows of scalars.  Rendering lives elsewhere; these tables
serialize to JSON and carry everything a plotting tool needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .driver import Trace
from .space import SearchSpaceSpec, parse_key

KINDS = ("unique_per_gen", "mean_progression", "op_frequency", "cache_stats")


class AnalysisError(ValueError):
    """Trace lacks what the requested analysis needs."""


@dataclass
class PlotData:
    kind: str
    columns: list[str]
    rows: list[list]
    meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "columns": self.columns,
            "rows": self.rows,
            "meta": self.meta,
        }

    def save(self, path) -> None:
        text = json.dumps(self.to_json_dict(), indent=2, sort_keys=True)
        Path(path).write_text(text + "\n", encoding="utf-8")


def load_plot_data(path) -> PlotData:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("kind") not in KINDS:
        raise AnalysisError(f"{path}: unknown plot data kind {doc.get('kind')!r}")
    return PlotData(
        kind=doc["kind"],
        columns=list(doc["columns"]),
        rows=[list(r) for r in doc["rows"]],
        meta=doc.get("meta", {}),
    )


def unique_per_generation(trace: Trace) -> PlotData:
    """Count of never-seen-before keys per generation, replayed from keys."""
    seen: set[str] = set()
    rows: list[list] = []
    for rec in trace.records:
        fresh = {k for k in rec.keys if k not in seen}
        seen.update(fresh)
        rows.append([rec.generation, len(fresh)])
    return PlotData(
        kind="unique_per_gen",
        columns=["generation", "unique_count"],
        rows=rows,
        meta={"n_pop": trace.n_pop, "total_unique": len(seen)},
    )


def mean_progression(trace: Trace, spec: SearchSpaceSpec | None = None) -> PlotData:
    """Softmax rows of each snapshotted mean, one row per (gen, cell, edge).

    Includes the footer's final state when present, so the last generation
    column shows the distribution the search actually returned.
    """
    from .space import softmax_rows

    if spec is None:
        spec = trace.space
    states: list[tuple[int, dict]] = []
    for rec in trace.records:
        if rec.state is None or "m" not in rec.state:
            raise AnalysisError("trace has no mean snapshots; re-run with snapshots on")
        states.append((rec.generation, rec.state))
    if trace.final_state is not None and "m" in trace.final_state:
        states.append((len(trace.records), trace.final_state))
    if not states:
        raise AnalysisError("trace has no mean snapshots; re-run with snapshots on")
    rows: list[list] = []
    for gen, state in states:
        weights = softmax_rows(state["m"], spec)
        row_idx = 0
        for ci, cell in enumerate(spec.cells):
            for ei in range(len(cell.edges)):
                rows.append([gen, ci, ei] + [float(w) for w in weights[row_idx]])
                row_idx += 1
    return PlotData(
        kind="mean_progression",
        columns=["generation", "cell", "edge"] + list(spec.ops.names),
        rows=rows,
        meta={"generations": len(states), "ops": list(spec.ops.names)},
    )


def top_k_op_frequency(
    trace: Trace, k: int = 10, spec: SearchSpaceSpec | None = None
) -> PlotData:
    """Operation counts over the k best distinct architectures seen.

    Distinct keys are ranked by fitness descending with ties broken by first
    evaluation order; if the trace holds fewer than k distinct keys the
    result is flagged truncated rather than failing.
    """
    if k < 1:
        raise AnalysisError("k must be at least 1")
    if spec is None:
        spec = trace.space
    first_fit: dict[str, float] = {}
    order: dict[str, int] = {}
    idx = 0
    for rec in trace.records:
        for key, fit in zip(rec.keys, rec.fitnesses):
            if key not in first_fit:
                first_fit[key] = fit
                order[key] = idx
                idx += 1
    ranked = sorted(first_fit, key=lambda key: (-first_fit[key], order[key]))
    kept = ranked[:k]
    counts = {name: 0 for name in spec.ops.names}
    for key in kept:
        geno = parse_key(key, spec)
        for cell, choice in zip(spec.cells, geno.cells):
            if not cell.is_selection:
                for op in choice:
                    counts[spec.ops.names[int(op)]] += 1
            else:
                for pairs in choice:
                    for _, op in pairs:
                        counts[spec.ops.names[int(op)]] += 1
    return PlotData(
        kind="op_frequency",
        columns=["operation", "count"],
        rows=[[name, counts[name]] for name in spec.ops.names],
        meta={"k": k, "kept": len(kept), "truncated": len(kept) < k},
    )


def cache_stats(trace: Trace) -> PlotData:
    """Cumulative sampled vs cumulative distinct keys per generation."""
    seen: set[str] = set()
    total = 0
    rows: list[list] = []
    for rec in trace.records:
        total += len(rec.keys)
        seen.update(rec.keys)
        rows.append([rec.generation, total, len(seen)])
    ratio = (len(seen) / total) if total else 0.0
    return PlotData(
        kind="cache_stats",
        columns=["generation", "cumulative_samples", "cumulative_unique"],
        rows=rows,
        meta={
            "final_ratio": ratio,
            "evaluator_calls": trace.evaluator_calls,
            "cache_hits": trace.cache_hits,
        },
    )
