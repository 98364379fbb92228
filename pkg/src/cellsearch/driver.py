"""Search loop: sample, map, evaluate through the memo table, update, record.

Two modes share one loop.  "cmaes" adapts the sampling distribution every
generation and reports the architecture decoded from the final mean.
"random" freezes the initial distribution (no updates at all) and reports the
best sampled architecture; it consumes the identical evaluation budget, which
makes it the control arm for the adaptation itself.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cmaes
from .evaluators import AFTable
from .space import (
    SearchSpaceSpec,
    canonical_key,
    dimension,
    from_json_dict,
    map_to_genotype,
    to_json_dict,
)

MODES = ("cmaes", "random")


class EvaluationError(RuntimeError):
    """An evaluator failed during the search loop; message carries context."""


@dataclass(frozen=True)
class SearchConfig:
    """Run settings; everything that affects output lives here."""

    generations: int = 100
    mode: str = "cmaes"
    seed: int = 0
    sigma0: float = 0.5
    snapshot_mean: bool = False
    snapshot_full_cov: bool = False
    parallel_eval_workers: int = 1
    use_af_table: bool = True

    def __post_init__(self) -> None:
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.parallel_eval_workers < 1:
            raise ValueError("parallel_eval_workers must be at least 1")

    def to_json_dict(self) -> dict:
        return {
            "generations": self.generations,
            "mode": self.mode,
            "seed": self.seed,
            "sigma0": self.sigma0,
            "snapshot_mean": self.snapshot_mean,
            "snapshot_full_cov": self.snapshot_full_cov,
            "parallel_eval_workers": self.parallel_eval_workers,
            "use_af_table": self.use_af_table,
        }


@dataclass
class GenerationRecord:
    """Everything observed in one generation.

    ``state`` is the pre-update distribution snapshot (the one that produced
    these samples), present only when snapshots were requested.
    """

    generation: int
    keys: list[str]
    fitnesses: list[float]
    cache_hits: int
    unique_new: int
    sigma: float
    best_key: str
    best_fitness: float
    state: dict | None = None


@dataclass
class Trace:
    """Full record of one run; serializes to JSONL via write_trace."""

    config: SearchConfig
    space: SearchSpaceSpec
    evaluator_descriptor: str
    n_pop: int
    dim: int
    records: list[GenerationRecord]
    final_key: str
    final_fitness: float
    best_key: str
    best_fitness: float
    total_samples: int
    evaluator_calls: int
    cache_hits: int
    unique_keys: int
    final_state: dict | None = None
    wall_clock: list[float] = field(default_factory=list)  # in-memory only


class _Precomputed:
    """Evaluator stand-in replaying results computed by the worker pool."""

    def __init__(self, spec: SearchSpaceSpec, results: dict[str, float]):
        self.spec = spec
        self._results = results
        self.descriptor = "precomputed"

    def evaluate(self, genotype) -> float:
        return self._results[canonical_key(genotype, self.spec)]


def _evaluate_generation(gen, genos, keys, evaluator, table, workers):
    """Fitness per sample, memoized when a table is present.

    With several workers, each distinct uncached key is evaluated once in the
    pool, then lookups replay serially so counters match the serial path
    exactly; outputs never depend on the worker count.
    """
    try:
        if table is None:
            return [float(evaluator.evaluate(g)) for g in genos]
        if workers > 1:
            pending: dict[str, int] = {}
            for i, key in enumerate(keys):
                if key not in table.values and key not in pending:
                    pending[key] = i
            if pending:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    computed = list(
                        pool.map(lambda i: float(evaluator.evaluate(genos[i])), pending.values())
                    )
                results = dict(zip(pending.keys(), computed))
                replay = _Precomputed(evaluator.spec, results)
                return [
                    table.lookup_or_evaluate(g, replay, key=k)
                    for g, k in zip(genos, keys)
                ]
        return [
            table.lookup_or_evaluate(g, evaluator, key=k) for g, k in zip(genos, keys)
        ]
    except cmaes.NonFiniteFitnessError:
        raise
    except Exception as err:
        raise EvaluationError(f"generation {gen}: evaluator failed: {err}") from err


def run_search(config: SearchConfig, spec: SearchSpaceSpec, evaluator) -> Trace:
    """Run one search and return its trace; dispatches on config.mode."""
    if to_json_dict(evaluator.spec) != to_json_dict(spec):
        raise ValueError("evaluator space does not match search space")
    n = dimension(spec)
    params = cmaes.default_params(n)
    state = cmaes.init_state(n, config.sigma0)
    rng = np.random.default_rng(config.seed)
    table = AFTable() if config.use_af_table else None
    adapt = config.mode == "cmaes"

    records: list[GenerationRecord] = []
    wall: list[float] = []
    seen: set[str] = set()
    best_key: str | None = None
    best_fitness = -np.inf
    raw_calls = 0

    for gen in range(config.generations):
        t0 = time.perf_counter()
        population = cmaes.sample_population(state, params, rng)
        genos = [map_to_genotype(x, spec) for x in population]
        keys = [canonical_key(g, spec) for g in genos]
        hits_before = table.hits if table is not None else 0
        fits = _evaluate_generation(gen, genos, keys, evaluator, table, config.parallel_eval_workers)
        if table is None:
            raw_calls += len(genos)
        gen_hits = (table.hits - hits_before) if table is not None else 0
        new_keys = [k for k in keys if k not in seen]
        unique_new = len(set(new_keys))
        seen.update(new_keys)
        for k, f in zip(keys, fits):
            if f > best_fitness:
                best_key, best_fitness = k, f
        snap = (
            cmaes.state_snapshot(state, full_cov=config.snapshot_full_cov)
            if config.snapshot_mean
            else None
        )
        records.append(
            GenerationRecord(
                generation=gen,
                keys=keys,
                fitnesses=[float(f) for f in fits],
                cache_hits=gen_hits,
                unique_new=unique_new,
                sigma=float(state.sigma),
                best_key=str(best_key),
                best_fitness=float(best_fitness),
                state=snap,
            )
        )
        if adapt:
            state = cmaes.step(state, params, population, fits)
        wall.append(time.perf_counter() - t0)

    # totals snapshot before any final-genotype evaluation
    evaluator_calls = table.misses if table is not None else raw_calls
    cache_hits = table.hits if table is not None else 0

    if adapt:
        final_geno = map_to_genotype(state.m, spec)
        final_key = canonical_key(final_geno, spec)
        if table is not None and final_key in table.values:
            final_fitness = table.values[final_key]
        else:
            try:
                final_fitness = float(evaluator.evaluate(final_geno))
            except Exception as err:
                raise EvaluationError(f"final genotype: evaluator failed: {err}") from err
    else:
        if config.generations == 0:
            # degenerate but legal: report the initial-mean decoding
            final_geno = map_to_genotype(state.m, spec)
            final_key = canonical_key(final_geno, spec)
            final_fitness = float(evaluator.evaluate(final_geno))
        else:
            final_key = str(best_key)
            final_fitness = float(best_fitness)
    if config.generations == 0 and best_key is None:
        best_key, best_fitness = final_key, final_fitness

    final_state = (
        cmaes.state_snapshot(state, full_cov=config.snapshot_full_cov)
        if config.snapshot_mean
        else None
    )
    return Trace(
        config=config,
        space=spec,
        evaluator_descriptor=evaluator.descriptor,
        n_pop=params.n_pop,
        dim=n,
        records=records,
        final_key=final_key,
        final_fitness=float(final_fitness),
        best_key=str(best_key),
        best_fitness=float(best_fitness),
        total_samples=config.generations * params.n_pop,
        evaluator_calls=evaluator_calls,
        cache_hits=cache_hits,
        unique_keys=len(seen),
        final_state=final_state,
        wall_clock=wall,
    )


def run_cmaes(config: SearchConfig, spec: SearchSpaceSpec, evaluator):
    """Adaptive search; returns (final genotype from the mean, trace)."""
    if config.mode != "cmaes":
        raise ValueError("config.mode must be 'cmaes'")
    trace = run_search(config, spec, evaluator)
    return parse_key_for(trace), trace


def run_random(config: SearchConfig, spec: SearchSpaceSpec, evaluator):
    """Frozen-distribution control; returns (best sampled genotype, trace)."""
    if config.mode != "random":
        raise ValueError("config.mode must be 'random'")
    trace = run_search(config, spec, evaluator)
    return parse_key_for(trace), trace


def parse_key_for(trace: Trace):
    from .space import parse_key

    return parse_key(trace.final_key, trace.space)


def _dump(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


def dumps_trace(trace: Trace) -> str:
    """JSONL text: header line, one record line per generation, footer line.

    Wall-clock is deliberately excluded so repeat runs are byte-identical.
    """
    lines = [
        _dump(
            {
                "type": "header",
                "config": trace.config.to_json_dict(),
                "space": to_json_dict(trace.space),
                "evaluator": trace.evaluator_descriptor,
                "n_pop": trace.n_pop,
                "dimension": trace.dim,
            }
        )
    ]
    for rec in trace.records:
        doc = {
            "type": "record",
            "generation": rec.generation,
            "keys": rec.keys,
            "fitnesses": rec.fitnesses,
            "cache_hits": rec.cache_hits,
            "unique_new": rec.unique_new,
            "sigma": rec.sigma,
            "best_key": rec.best_key,
            "best_fitness": rec.best_fitness,
        }
        if rec.state is not None:
            doc["state"] = rec.state
        lines.append(_dump(doc))
    footer = {
        "type": "footer",
        "final_key": trace.final_key,
        "final_fitness": trace.final_fitness,
        "best_key": trace.best_key,
        "best_fitness": trace.best_fitness,
        "total_samples": trace.total_samples,
        "evaluator_calls": trace.evaluator_calls,
        "cache_hits": trace.cache_hits,
        "unique_keys": trace.unique_keys,
    }
    if trace.final_state is not None:
        footer["final_state"] = trace.final_state
    lines.append(_dump(footer))
    return "\n".join(lines) + "\n"


def write_trace(trace: Trace, path) -> None:
    Path(path).write_text(dumps_trace(trace), encoding="utf-8")


class TraceFormatError(ValueError):
    """Trace file is not parseable as header/records/footer JSONL."""


def read_trace(path) -> Trace:
    """Reconstruct a Trace (minus wall-clock) from a JSONL file."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 2:
        raise TraceFormatError(f"{path}: needs at least header and footer")
    try:
        docs = [json.loads(line) for line in lines if line.strip()]
    except json.JSONDecodeError as err:
        raise TraceFormatError(f"{path}: bad JSON line: {err}") from err
    header, footer = docs[0], docs[-1]
    if header.get("type") != "header" or footer.get("type") != "footer":
        raise TraceFormatError(f"{path}: missing header or footer line")
    cfg = SearchConfig(**header["config"])
    spec = from_json_dict(header["space"])
    records = []
    for doc in docs[1:-1]:
        if doc.get("type") != "record":
            raise TraceFormatError(f"{path}: unexpected line type {doc.get('type')!r}")
        records.append(
            GenerationRecord(
                generation=doc["generation"],
                keys=list(doc["keys"]),
                fitnesses=[float(f) for f in doc["fitnesses"]],
                cache_hits=doc["cache_hits"],
                unique_new=doc["unique_new"],
                sigma=float(doc["sigma"]),
                best_key=doc["best_key"],
                best_fitness=float(doc["best_fitness"]),
                state=doc.get("state"),
            )
        )
    return Trace(
        config=cfg,
        space=spec,
        evaluator_descriptor=header["evaluator"],
        n_pop=header["n_pop"],
        dim=header["dimension"],
        records=records,
        final_key=footer["final_key"],
        final_fitness=float(footer["final_fitness"]),
        best_key=footer["best_key"],
        best_fitness=float(footer["best_fitness"]),
        total_samples=footer["total_samples"],
        evaluator_calls=footer["evaluator_calls"],
        cache_hits=footer["cache_hits"],
        unique_keys=footer["unique_keys"],
        final_state=footer.get("final_state"),
    )
