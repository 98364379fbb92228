"""Command line front end.

Subcommands: ``search`` runs a search and writes a JSONL trace, ``gen-bench``
writes a synthetic benchmark file, ``brute`` enumerates the optimum, and
``plot-data`` turns a trace into a tabular plot-data JSON file.

Exit codes: 0 success, 1 configuration error (flags, selectors, numbers),
2 runtime error (missing or malformed files, evaluator failures, caps).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import analysis, driver, evaluators, space


class ConfigError(ValueError):
    """Bad flags or selector syntax; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; config errors are 1
        raise ConfigError(message)


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def parse_space(selector: str) -> space.SearchSpaceSpec:
    if selector == "s1":
        return space.s1_space()
    if selector == "s2":
        return space.s2_space()
    if selector.startswith("custom:"):
        path = Path(selector.split(":", 1)[1])
        if not path.is_file():
            raise FileNotFoundError(f"space file not found: {path}")
        return space.load_space(path)
    raise ConfigError(f"unknown space selector {selector!r} (s1, s2, custom:<path>)")


def parse_evaluator(selector: str, spc: space.SearchSpaceSpec):
    """Build the evaluator named by ``selector`` for the chosen space."""
    if selector.startswith("tabular:"):
        path = Path(selector.split(":", 1)[1])
        if not path.is_file():
            raise FileNotFoundError(f"benchmark file not found: {path}")
        bench = evaluators.load_benchmark(path)
        if space.to_json_dict(bench.spec) != space.to_json_dict(spc):
            raise evaluators.BenchmarkError(
                f"{path}: benchmark space does not match selected space"
            )
        meta = bench.meta or {}
        if not bench.entries and meta.get("generator") == "synthetic":
            # reference file without materialized entries: rebuild the generator
            return evaluators.gen_synthetic(
                spc, int(meta["seed"]), float(meta.get("beta", 0.0))
            )
        return bench
    if selector.startswith("synthetic:"):
        parts = selector.split(":")
        try:
            seed = int(parts[1])
            beta = float(parts[2]) if len(parts) > 2 else 0.0
        except (IndexError, ValueError):
            raise ConfigError(
                f"bad synthetic selector {selector!r} (synthetic:<seed>[:<beta>])"
            ) from None
        if beta < 0:
            raise ConfigError("beta must be non-negative")
        return evaluators.gen_synthetic(spc, seed, beta)
    raise ConfigError(
        f"unknown evaluator selector {selector!r} (tabular:<path>, synthetic:<seed>[:<beta>])"
    )


def _check_out_path(path: Path) -> Path:
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {parent}")
    return path


def cmd_search(args) -> int:
    spc = parse_space(args.space)
    out = _check_out_path(Path(args.out))
    evaluator = parse_evaluator(args.evaluator, spc)
    config = driver.SearchConfig(
        generations=args.generations,
        mode=args.mode,
        seed=args.seed,
        sigma0=args.sigma0,
        snapshot_mean=args.snapshot_mean,
        snapshot_full_cov=args.snapshot_full_cov,
        parallel_eval_workers=args.workers,
    )
    t0 = time.perf_counter()
    trace = driver.run_search(config, spc, evaluator)
    driver.write_trace(trace, out)
    print(
        f"search: {config.generations} generations in {time.perf_counter() - t0:.2f}s",
        file=sys.stderr,
    )
    summary = {
        "final_key": trace.final_key,
        "final_fitness": trace.final_fitness,
        "best_key": trace.best_key,
        "best_fitness": trace.best_fitness,
        "total_samples": trace.total_samples,
        "evaluator_calls": trace.evaluator_calls,
        "cache_hits": trace.cache_hits,
        "unique_keys": trace.unique_keys,
        "trace": str(out),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_gen_bench(args) -> int:
    spc = parse_space(args.space)
    out = _check_out_path(Path(args.out))
    if args.beta < 0:
        raise ConfigError("beta must be non-negative")
    bench_meta = {"generator": "synthetic", "seed": args.seed, "beta": args.beta}
    if args.materialize:
        synth = evaluators.gen_synthetic(spc, args.seed, args.beta)
        table = evaluators.materialize(synth, cap=args.cap)
        table.meta = bench_meta
        evaluators.save_benchmark(table, out)
        count = len(table.entries)
    else:
        table = evaluators.TabularBenchmark(spec=spc, entries={}, meta=bench_meta)
        evaluators.save_benchmark(table, out)
        count = 0
    print(
        json.dumps(
            {"out": str(out), "entries": count, "space": args.space,
             "seed": args.seed, "beta": args.beta},
            sort_keys=True,
        )
    )
    return 0


def cmd_brute(args) -> int:
    spc = parse_space(args.space)
    ranking_out = _check_out_path(Path(args.ranking_out)) if args.ranking_out else None
    evaluator = parse_evaluator(args.evaluator, spc)
    if ranking_out is not None:
        best_g, best_f, ranking = evaluators.brute_force_best(
            evaluator, spc, cap=args.cap, return_ranking=True
        )
        lines = [f"{key}\t{fit:.17g}" for key, fit in ranking]
        ranking_out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        best_g, best_f = evaluators.brute_force_best(evaluator, spc, cap=args.cap)
    print(f"{space.canonical_key(best_g, spc)}\t{best_f:.17g}")
    return 0


def cmd_plot_data(args) -> int:
    trace_path = Path(args.trace)
    if not trace_path.is_file():
        raise FileNotFoundError(f"trace file not found: {trace_path}")
    out = _check_out_path(Path(args.out))
    trace = driver.read_trace(trace_path)
    if args.which == "unique":
        data = analysis.unique_per_generation(trace)
    elif args.which == "mean":
        data = analysis.mean_progression(trace)
    elif args.which == "opfreq":
        data = analysis.top_k_op_frequency(trace, k=args.k)
    elif args.which == "cache":
        data = analysis.cache_stats(trace)
    else:  # pragma: no cover - argparse choices guard this
        raise ConfigError(f"unknown report {args.which!r}")
    data.save(out)
    print(json.dumps({"out": str(out), "kind": data.kind, "rows": len(data.rows)},
                     sort_keys=True))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="cellsearch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("search", help="run a search and write a JSONL trace")
    ps.add_argument("--space", required=True, help="s1 | s2 | custom:<path>")
    ps.add_argument("--evaluator", required=True,
                    help="tabular:<path> | synthetic:<seed>[:<beta>]")
    ps.add_argument("--mode", choices=driver.MODES, default="cmaes")
    ps.add_argument("--generations", type=_nonneg_int, default=100)
    ps.add_argument("--seed", type=int, required=True)
    ps.add_argument("--sigma0", type=float, default=0.5)
    ps.add_argument("--out", required=True, help="trace output path (JSONL)")
    ps.add_argument("--snapshot-mean", action="store_true",
                    help="record distribution snapshots per generation")
    ps.add_argument("--snapshot-full-cov", action="store_true",
                    help="include the full covariance in snapshots")
    ps.add_argument("--workers", type=_positive_int, default=1)
    ps.set_defaults(func=cmd_search)

    pg = sub.add_parser("gen-bench", help="write a synthetic benchmark file")
    pg.add_argument("--space", required=True)
    pg.add_argument("--seed", type=int, required=True)
    pg.add_argument("--beta", type=float, default=0.0)
    pg.add_argument("--materialize", action="store_true",
                    help="store every genotype's fitness instead of a reference")
    pg.add_argument("--cap", type=_positive_int, default=1_000_000)
    pg.add_argument("--out", required=True)
    pg.set_defaults(func=cmd_gen_bench)

    pb = sub.add_parser("brute", help="enumerate the space for the true optimum")
    pb.add_argument("--space", required=True)
    pb.add_argument("--evaluator", required=True)
    pb.add_argument("--cap", type=_positive_int, default=1_000_000)
    pb.add_argument("--ranking-out", default=None,
                    help="also write the full key<TAB>fitness ranking")
    pb.set_defaults(func=cmd_brute)

    pp = sub.add_parser("plot-data", help="export tabular plot data from a trace")
    pp.add_argument("--trace", required=True)
    pp.add_argument("--which", choices=("unique", "mean", "opfreq", "cache"),
                    required=True)
    pp.add_argument("--k", type=_positive_int, default=10,
                    help="top-k cutoff for opfreq")
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (
        evaluators.BenchmarkError,
        driver.EvaluationError,
        driver.TraceFormatError,
        analysis.AnalysisError,
        space.SpaceError,
        FileNotFoundError,
        OSError,
        ValueError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
