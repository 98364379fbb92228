"""Fitness evaluators: tabular benchmarks, synthetic benchmarks, memo table.

Every evaluator maps a genotype to a deterministic fitness in [0, 1].  The
memo table (AFTable) caches fitness by canonical key so repeated genotypes
cost a dictionary lookup instead of a fresh evaluation.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .space import (
    Genotype,
    SearchSpaceSpec,
    SpaceError,
    canonical_key,
    enumerate_genotypes,
    from_json_dict,
    genotype_count,
    parse_key,
    to_json_dict,
)


class BenchmarkError(ValueError):
    """Base class for benchmark loading and lookup failures."""


class MalformedBenchmarkError(BenchmarkError):
    """File is not valid JSON or lacks required structure."""


class DuplicateKeyError(BenchmarkError):
    """The same canonical key appears twice in a benchmark file."""


class UnknownOperationError(BenchmarkError):
    """A benchmark key does not parse against its own space definition."""


class FitnessRangeError(BenchmarkError):
    """A stored fitness is outside [0, 1] or not a finite number."""


class MissingEntryError(BenchmarkError):
    """Lookup of a genotype the benchmark has no entry for."""


class EnumerationCapError(BenchmarkError):
    """The space is too large to enumerate under the requested cap."""


@dataclass
class TabularBenchmark:
    """Exhaustive (or partial) canonical-key -> fitness lookup table."""

    spec: SearchSpaceSpec
    entries: dict[str, float]
    meta: dict = field(default_factory=dict)
    source: str = "memory"

    @property
    def descriptor(self) -> str:
        return f"tabular:{self.source}"

    def evaluate(self, genotype: Genotype) -> float:
        key = canonical_key(genotype, self.spec)
        try:
            return self.entries[key]
        except KeyError:
            raise MissingEntryError(f"benchmark has no entry for {key!r}") from None


@dataclass
class SyntheticBenchmark:
    """Procedural fitness landscape seeded per run, no file needed.

    Each (edge, op) choice contributes a fixed uniform utility; with
    ``beta > 0`` every unordered pair of active edges adds a coupling term
    scaled by beta.  The raw sum is mapped into [0, 1] by an affine normalizer
    built from analytic bounds, so a beta = 0 landscape takes the value 1.0
    exactly at the per-edge argmax genotype.
    """

    spec: SearchSpaceSpec
    seed: int
    beta: float
    unary: np.ndarray
    pairwise: np.ndarray | None
    lo: float
    hi: float

    @property
    def descriptor(self) -> str:
        return f"synthetic:seed={self.seed}:beta={self.beta:g}"

    def evaluate(self, genotype: Genotype) -> float:
        edges, ops = _active_pairs(genotype, self.spec)
        raw = float(self.unary[edges, ops].sum())
        if self.pairwise is not None and len(edges) > 1:
            a_idx, b_idx = np.triu_indices(len(edges), k=1)
            pa = _pair_index(edges[a_idx], edges[b_idx], self.unary.shape[0])
            raw += self.beta * float(self.pairwise[pa, ops[a_idx], ops[b_idx]].sum())
        denom = self.hi - self.lo
        if denom <= 0:
            return 0.0
        return (raw - self.lo) / denom


def _active_pairs(genotype: Genotype, spec: SearchSpaceSpec):
    """Global edge indices and op indices the genotype switches on."""
    from .space import validate_genotype

    validate_genotype(genotype, spec)
    edges: list[int] = []
    ops: list[int] = []
    base = 0
    for cell, choice in zip(spec.cells, genotype.cells):
        if not cell.is_selection:
            for e, op in enumerate(choice):
                edges.append(base + e)
                ops.append(int(op))
        else:
            for node, pairs in zip(cell.intermediate_nodes, choice):
                by_src = {cell.edges[e][0]: e for e in cell.incoming(node)}
                for src, op in pairs:
                    edges.append(base + by_src[int(src)])
                    ops.append(int(op))
        base += len(cell.edges)
    return np.asarray(edges), np.asarray(ops)


def _pair_index(a: np.ndarray, b: np.ndarray, n_edges: int) -> np.ndarray:
    """Flat index of unordered pair (a < b) in row-major upper triangle."""
    return a * (2 * n_edges - a - 1) // 2 + (b - a - 1)


def gen_synthetic(spec: SearchSpaceSpec, seed: int, beta: float = 0.0) -> SyntheticBenchmark:
    """Build the synthetic landscape for ``spec`` from one seeded stream.

    The unary table is drawn first in one call, then the pairwise table in one
    call (skipped entirely when beta = 0), so identical (spec, seed, beta)
    always reproduce identical fitness everywhere.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    n_edges = sum(len(c.edges) for c in spec.cells)
    n_ops = len(spec.ops)
    rng = np.random.default_rng(seed)
    unary = rng.random((n_edges, n_ops))
    pairwise = None
    if beta > 0:
        n_pairs = n_edges * (n_edges - 1) // 2
        pairwise = rng.random((n_pairs, n_ops, n_ops))
    all_edges_active = all(not c.is_selection for c in spec.cells)
    hi = float(unary.max(axis=1).sum())
    lo = float(unary.min(axis=1).sum()) if all_edges_active else 0.0
    if pairwise is not None:
        hi += beta * float(pairwise.max(axis=(1, 2)).sum())
        if all_edges_active:
            lo += beta * float(pairwise.min(axis=(1, 2)).sum())
    return SyntheticBenchmark(
        spec=spec, seed=int(seed), beta=float(beta),
        unary=unary, pairwise=pairwise, lo=lo, hi=hi,
    )


class AFTable:
    """Thread-safe fitness memo keyed by canonical genotype key.

    Counters satisfy lookups = hits + misses; a miss is counted before the
    evaluator runs, and evaluator errors propagate without storing anything.
    """

    def __init__(self) -> None:
        self.values: dict[str, float] = {}
        self.lookups = 0
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def lookup_or_evaluate(self, genotype: Genotype, evaluator, key: str | None = None) -> float:
        if key is None:
            key = canonical_key(genotype, evaluator.spec)
        with self._lock:
            self.lookups += 1
            if key in self.values:
                self.hits += 1
                return self.values[key]
            self.misses += 1
        value = float(evaluator.evaluate(genotype))
        with self._lock:
            # concurrent misses on one key may both evaluate; deterministic
            # evaluators make last-write-wins harmless
            self.values[key] = value
        return value


def af_lookup_or_evaluate(genotype: Genotype, evaluator, table: AFTable) -> float:
    return table.lookup_or_evaluate(genotype, evaluator)


def save_benchmark(bench: TabularBenchmark, path) -> None:
    """Write the benchmark as sorted-key JSON; byte-stable for fixed content."""
    doc = {
        "spec": to_json_dict(bench.spec),
        "entries": dict(bench.entries),
        "meta": dict(bench.meta),
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _reject_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise DuplicateKeyError(f"duplicate key {k!r} in benchmark file")
        seen[k] = v
    return seen


def load_benchmark(path) -> TabularBenchmark:
    """Read and fully validate a benchmark file.

    Raises MalformedBenchmarkError, DuplicateKeyError, UnknownOperationError,
    or FitnessRangeError depending on what is wrong.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"), object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as err:
        raise MalformedBenchmarkError(f"{path}: not valid JSON: {err}") from err
    if not isinstance(doc, dict) or "spec" not in doc or "entries" not in doc:
        raise MalformedBenchmarkError(f"{path}: missing 'spec' or 'entries'")
    try:
        spec = from_json_dict(doc["spec"])
    except SpaceError as err:
        raise MalformedBenchmarkError(f"{path}: bad space definition: {err}") from err
    entries: dict[str, float] = {}
    for key, value in doc["entries"].items():
        try:
            parse_key(key, spec)
        except SpaceError as err:
            raise UnknownOperationError(f"{path}: bad key {key!r}: {err}") from err
        try:
            fitness = float(value)
        except (TypeError, ValueError) as err:
            raise FitnessRangeError(f"{path}: fitness for {key!r} is not a number") from err
        if not np.isfinite(fitness) or not (0.0 <= fitness <= 1.0):
            raise FitnessRangeError(f"{path}: fitness {fitness!r} for {key!r} outside [0, 1]")
        entries[key] = fitness
    meta = doc.get("meta", {})
    return TabularBenchmark(spec=spec, entries=entries, meta=meta, source=str(path))


def materialize(bench, cap: int = 1_000_000) -> TabularBenchmark:
    """Evaluate every genotype of a (synthetic) evaluator into a table."""
    total = genotype_count(bench.spec)
    if total > cap:
        raise EnumerationCapError(f"space has {total} genotypes, cap is {cap}")
    entries = {
        canonical_key(g, bench.spec): float(bench.evaluate(g))
        for g in enumerate_genotypes(bench.spec)
    }
    meta = {"generator": "synthetic", "seed": getattr(bench, "seed", None),
            "beta": getattr(bench, "beta", None)}
    return TabularBenchmark(spec=bench.spec, entries=entries, meta=meta)


def brute_force_best(
    evaluator, spec: SearchSpaceSpec, cap: int = 1_000_000, return_ranking: bool = False
):
    """Exhaustive optimum: (best_genotype, best_fitness[, ranking]).

    The ranking is every (key, fitness) sorted by fitness descending, ties in
    enumeration order.  Refuses spaces above ``cap`` genotypes.
    """
    total = genotype_count(spec)
    if total > cap:
        raise EnumerationCapError(f"space has {total} genotypes, cap is {cap}")
    best_g: Genotype | None = None
    best_f = -np.inf
    scored: list[tuple[str, float]] = []
    for g in enumerate_genotypes(spec):
        f = float(evaluator.evaluate(g))
        if return_ranking:
            scored.append((canonical_key(g, spec), f))
        if f > best_f:
            best_g, best_f = g, f
    if best_g is None:
        raise BenchmarkError("space enumerated to nothing")
    if not return_ranking:
        return best_g, best_f
    scored.sort(key=lambda kv: -kv[1])  # stable: ties keep enumeration order
    return best_g, best_f, scored


def percentile_of(ranking: list[tuple[str, float]], key: str) -> tuple[int, float]:
    """Competition rank and rank/total for ``key`` within a full ranking."""
    fit = dict(ranking)
    if key not in fit:
        raise MissingEntryError(f"{key!r} not present in ranking")
    mine = fit[key]
    rank = 1 + sum(1 for _, f in ranking if f > mine)
    return rank, rank / len(ranking)
