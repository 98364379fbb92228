"""Render validated plot-data tables to image files.

Pure data shaping (averaging, stacking, grouping) is separated from the
matplotlib calls so the numbers behind every figure are testable without
touching pixels.  The operation -> color assignment is computed once per
invocation from every input table, keeping colors stable across figures.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # headless; must precede pyplot import

import matplotlib.pyplot as plt
import numpy as np

from .schema import SchemaError, Table, require_kind

_HATCHES = ("", "//", "..", "xx", "\\\\", "oo")


def build_color_map(op_names) -> dict[str, tuple]:
    """Stable color per operation name: sorted names over a fixed palette."""
    names = sorted(set(op_names))
    palette = plt.get_cmap("tab10" if len(names) <= 10 else "tab20")
    return {name: palette(i % palette.N) for i, name in enumerate(names)}


def collect_color_map(tables: list[Table]) -> dict[str, tuple]:
    names: list[str] = []
    for table in tables:
        names.extend(table.op_names)
    return build_color_map(names)


# ------------------------------------------------------------ data shaping


def average_unique(tables: list[Table]) -> tuple[list[int], list[float]]:
    """Per-generation arithmetic mean of unique counts across runs.

    All inputs must share one generation axis; differing axes mean the runs
    are not comparable and averaging them would silently mislead.
    """
    axes = [[int(r[0]) for r in t.rows] for t in tables]
    for table, axis in zip(tables[1:], axes[1:]):
        if axis != axes[0]:
            raise SchemaError(f"{table.source}: generation axis differs across inputs")
    counts = np.array([[float(r[1]) for r in t.rows] for t in tables])
    return axes[0], list(counts.mean(axis=0))


def stack_rows(table: Table) -> dict[tuple[int, int], tuple[list[int], np.ndarray]]:
    """Per (cell, edge): generation axis and a (gen, op) weight matrix."""
    ops = table.op_names
    grouped: dict[tuple[int, int], list[tuple[int, list[float]]]] = {}
    for row in table.rows:
        gen, cell, edge = int(row[0]), int(row[1]), int(row[2])
        grouped.setdefault((cell, edge), []).append((gen, [float(v) for v in row[3:]]))
    out = {}
    for key, entries in grouped.items():
        entries.sort(key=lambda e: e[0])
        gens = [g for g, _ in entries]
        weights = np.array([w for _, w in entries])
        out[key] = (gens, weights)
    assert all(w.shape[1] == len(ops) for _, (_, w) in out.items())
    return out


def frequency_groups(tables: list[Table]) -> tuple[list[str], list[list[int]]]:
    """Shared operation axis and one count series per input table."""
    ops = tables[0].op_names
    series = []
    for table in tables:
        counts = {str(r[0]): int(r[1]) for r in table.rows}
        series.append([counts.get(name, 0) for name in ops])
    return ops, series


# --------------------------------------------------------------- figures


def _finish(fig, out: Path) -> Path:
    fig.tight_layout()
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def render_unique(tables: list[Table], out: Path) -> Path:
    for t in tables:
        require_kind(t, "unique_per_gen")
    gens, mean = average_unique(tables)
    fig, ax = plt.subplots(figsize=(7, 4))
    for table in tables:
        ax.plot([r[0] for r in table.rows], [r[1] for r in table.rows],
                color="steelblue", alpha=0.25, linewidth=1)
    ax.plot(gens, mean, color="navy", linewidth=2,
            label=f"mean of {len(tables)} run(s)")
    ax.set_xlabel("generation")
    ax.set_ylabel("unique architectures sampled")
    ax.legend()
    return _finish(fig, out)


def render_mean(tables: list[Table], out: Path, colors=None) -> Path:
    if len(tables) != 1:
        raise SchemaError("stacked progression renders exactly one input table")
    table = require_kind(tables[0], "mean_progression")
    ops = table.op_names
    colors = colors or build_color_map(ops)
    stacks = stack_rows(table)
    keys = sorted(stacks)
    fig, axes = plt.subplots(len(keys), 1, figsize=(8, 1.6 * len(keys)),
                             sharex=True, squeeze=False)
    for ax, key in zip(axes[:, 0], keys):
        gens, weights = stacks[key]
        bottom = np.zeros(len(gens))
        for j, name in enumerate(ops):
            ax.bar(gens, weights[:, j], bottom=bottom, width=1.0,
                   color=colors[name], label=name)
            bottom += weights[:, j]
        ax.set_ylim(0, 1)
        ax.set_ylabel(f"cell {key[0]} edge {key[1]}", fontsize=8)
    axes[0, 0].legend(fontsize=7, ncol=min(len(ops), 4), loc="upper right")
    axes[-1, 0].set_xlabel("generation")
    return _finish(fig, out)


def render_opfreq(tables: list[Table], out: Path, colors=None) -> Path:
    for t in tables:
        require_kind(t, "op_frequency")
    ops, series = frequency_groups(tables)
    colors = colors or build_color_map(ops)
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.arange(len(ops))
    width = 0.8 / len(series)
    for i, counts in enumerate(series):
        offset = (i - (len(series) - 1) / 2) * width
        ax.bar(x + offset, counts, width=width,
               color=[colors[name] for name in ops],
               hatch=_HATCHES[i % len(_HATCHES)], edgecolor="black", linewidth=0.4)
    ax.set_xticks(x, ops, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("occurrences in top architectures")
    return _finish(fig, out)


def render_cache(tables: list[Table], out: Path) -> Path:
    for t in tables:
        require_kind(t, "cache_stats")
    fig, ax = plt.subplots(figsize=(7, 4))
    for table in tables:
        gens = [r[0] for r in table.rows]
        ax.plot(gens, [r[1] for r in table.rows], linestyle="--",
                label=f"{Path(table.source).stem}: sampled")
        ax.plot(gens, [r[2] for r in table.rows], linestyle="-",
                label=f"{Path(table.source).stem}: evaluated")
    ax.set_xlabel("generation")
    ax.set_ylabel("cumulative count")
    ax.legend(fontsize=7)
    return _finish(fig, out)


_RENDERERS = {
    "unique": render_unique,
    "mean": render_mean,
    "opfreq": render_opfreq,
    "cache": render_cache,
}


def render(kind: str, tables: list[Table], out) -> Path:
    """Dispatch to the kind's renderer; returns the written path."""
    out = Path(out)
    colors = collect_color_map(tables)
    if kind in ("mean", "opfreq"):
        return _RENDERERS[kind](tables, out, colors=colors)
    return _RENDERERS[kind](tables, out)
