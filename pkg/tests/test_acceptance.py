"""Acceptance suite: every required behavior, one verdict line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the verdict lines.
Each test prints exactly one ``[PASS]``/``[FAIL]`` line and then asserts, so
a red test always comes with the measured numbers that failed it.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np
import pytest

from cellsearch import cmaes
from cellsearch.cli import main as cli_main
from cellsearch.driver import SearchConfig, run_search
from cellsearch.evaluators import brute_force_best, gen_synthetic, percentile_of
from cellsearch.space import s2_space


def verdict(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def s2_suite():
    """Everything the S2 acceptance criteria share, built once and timed."""
    t0 = time.perf_counter()
    spec = s2_space()
    bench = gen_synthetic(spec, seed=7, beta=0.3)
    _, _, ranking = brute_force_best(bench, spec, cap=20_000, return_ranking=True)
    runs = {"cmaes": [], "random": [], "cmaes_no_table": []}
    for seed in range(20):
        runs["cmaes"].append(
            run_search(SearchConfig(generations=100, mode="cmaes", seed=seed), spec, bench)
        )
        runs["random"].append(
            run_search(SearchConfig(generations=100, mode="random", seed=seed), spec, bench)
        )
        runs["cmaes_no_table"].append(
            run_search(
                SearchConfig(generations=100, mode="cmaes", seed=seed, use_af_table=False),
                spec,
                bench,
            )
        )
    elapsed = time.perf_counter() - t0
    return {"spec": spec, "ranking": ranking, "runs": runs, "elapsed": elapsed}


def test_sphere_convergence_within_budget():
    t0 = time.perf_counter()
    n = 10
    params = cmaes.default_params(n)
    passes, worst_evals = 0, 0
    for seed in range(10):
        state = dataclasses.replace(cmaes.init_state(n, 0.5), m=np.ones(n))
        rng = np.random.default_rng(seed)
        best, evals = -np.inf, 0
        while evals + params.n_pop <= 5000:
            pop = cmaes.sample_population(state, params, rng)
            fits = -np.sum(pop**2, axis=1)
            evals += params.n_pop
            best = max(best, float(fits.max()))
            if best > -1e-10:
                break
            state = cmaes.step(state, params, pop, fits)
        if best > -1e-10:
            passes += 1
            worst_evals = max(worst_evals, evals)
    elapsed = time.perf_counter() - t0
    verdict(
        "sphere-10d convergence",
        passes >= 9 and elapsed < 5.0,
        f"{passes}/10 seeds reached -1e-10 (max {worst_evals}/5000 evals) in {elapsed:.2f}s",
    )


def test_eigensolver_batch_accuracy():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst_recon, worst_ortho, count = 0.0, 0.0, 0
    for n in (30, 224):
        for _ in range(50):
            M = rng.normal(size=(n, n))
            C = M.T @ M + np.eye(n)
            B, D = cmaes.eig_sym(C)
            recon = np.max(np.abs(B @ np.diag(D**2) @ B.T - C))
            worst_recon = max(worst_recon, recon / np.linalg.norm(C, np.inf))
            worst_ortho = max(worst_ortho, np.max(np.abs(B.T @ B - np.eye(n))))
            count += 1
    elapsed = time.perf_counter() - t0
    verdict(
        "eigensolver batch",
        count == 100 and worst_recon <= 1e-9 and worst_ortho <= 1e-9 and elapsed < 30.0,
        f"{count} matrices, worst relative reconstruction {worst_recon:.2e}, "
        f"worst orthogonality {worst_ortho:.2e}, {elapsed:.2f}s",
    )


def test_population_sizes_match_published_settings():
    big = cmaes.default_params(224).n_pop
    small = cmaes.default_params(30).n_pop
    verdict(
        "population sizes",
        big == 20 and small == 14,
        f"n=224 -> {big} (want 20), n=30 -> {small} (want 14)",
    )


def test_search_quality_percentiles(s2_suite):
    ranking = s2_suite["ranking"]
    pcts = []
    for trace in s2_suite["runs"]["cmaes"]:
        _, pct = percentile_of(ranking, trace.final_key)
        pcts.append(pct)
    median = float(np.median(pcts))
    p90 = float(np.percentile(pcts, 90))
    elapsed = s2_suite["elapsed"]
    verdict(
        "search quality",
        median <= 0.005 and p90 <= 0.02 and elapsed < 60.0,
        f"median percentile {median:.5f} (<=0.005), p90 {p90:.5f} (<=0.02), "
        f"suite {elapsed:.1f}s (<60s)",
    )


def test_ablation_direction(s2_suite):
    mean_cmaes = float(np.mean([t.best_fitness for t in s2_suite["runs"]["cmaes"]]))
    mean_random = float(np.mean([t.best_fitness for t in s2_suite["runs"]["random"]]))
    verdict(
        "ablation direction",
        mean_cmaes >= mean_random,
        f"mean best fitness cmaes {mean_cmaes:.5f} >= random {mean_random:.5f}",
    )


def test_memo_table_effectiveness(s2_suite):
    ratios = [
        t.evaluator_calls / t.total_samples for t in s2_suite["runs"]["cmaes"]
    ]
    same_final = sum(
        on.final_key == off.final_key
        for on, off in zip(s2_suite["runs"]["cmaes"], s2_suite["runs"]["cmaes_no_table"])
    )
    more_calls = sum(
        off.evaluator_calls > on.evaluator_calls
        for on, off in zip(s2_suite["runs"]["cmaes"], s2_suite["runs"]["cmaes_no_table"])
    )
    verdict(
        "memo table effectiveness",
        max(ratios) < 0.5 and same_final == 20 and more_calls == 20,
        f"call ratio {min(ratios):.3f}..{max(ratios):.3f} (<0.5), identical finals "
        f"{same_final}/20, strictly more calls without table {more_calls}/20",
    )


def test_exploration_to_exploitation_shape(s2_suite):
    holds = 0
    margins = []
    for trace in s2_suite["runs"]["cmaes"]:
        uniques = [rec.unique_new for rec in trace.records]
        early = float(np.mean(uniques[:10]))
        late = float(np.mean(uniques[-10:]))
        margins.append(early - late)
        if late < early:
            holds += 1
    verdict(
        "exploration shape",
        holds == 20,
        f"late-phase mean unique < early-phase on {holds}/20 seeds "
        f"(min margin {min(margins):.2f})",
    )


def test_trace_determinism_via_cli(tmp_path, capsys):
    outs = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    for out in outs:
        code = cli_main(
            ["search", "--space", "s2", "--evaluator", "synthetic:7:0.3",
             "--mode", "cmaes", "--generations", "50", "--seed", "1",
             "--snapshot-mean", "--out", str(out)]
        )
        assert code == 0
    capsys.readouterr()  # drop the CLI's own summaries; only the verdict matters
    identical = outs[0].read_bytes() == outs[1].read_bytes()
    verdict(
        "trace determinism",
        identical,
        f"repeated search command produced byte-identical traces "
        f"({outs[0].stat().st_size} bytes)",
    )
