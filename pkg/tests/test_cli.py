"""Command line behavior: contracts, exit codes, determinism, file hygiene.

Everything runs in-process through main(argv) so exit codes and output
streams are observable without spawning an interpreter per case.
"""

from __future__ import annotations

import json

import numpy as np
import pytest

from cellsearch import analysis, driver, evaluators, space
from cellsearch.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def last_json(out: str) -> dict:
    return json.loads(out.strip().split("\n")[-1])


def tiny_space_file(tmp_path):
    spc = space.SearchSpaceSpec(
        kind="custom",
        ops=space.OperationSet(names=("none", "a", "b"), zero_index=0),
        cells=(space.CellSpec(node_count=3, edges=((0, 2), (1, 2))),),
    )
    path = tmp_path / "tiny_space.json"
    path.write_text(json.dumps(space.to_json_dict(spc)), encoding="utf-8")
    return path, spc


# ------------------------------------------------------------- search


def test_search_contract(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    code, stdout, stderr = run_cli(
        capsys, "search", "--space", "s2", "--evaluator", "synthetic:7:0.3",
        "--mode", "cmaes", "--generations", "20", "--seed", "1", "--out", str(out),
    )
    assert code == 0
    assert "generations in" in stderr
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 22  # header + 20 records + footer
    summary = last_json(stdout)
    assert set(summary) == {
        "final_key", "final_fitness", "best_key", "best_fitness",
        "total_samples", "evaluator_calls", "cache_hits", "unique_keys", "trace",
    }
    footer = json.loads(lines[-1])
    assert summary["final_key"] == footer["final_key"]
    assert summary["final_fitness"] == footer["final_fitness"]
    assert summary["total_samples"] == 20 * 14
    assert summary["trace"] == str(out)


def test_search_repeat_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    args = ["search", "--space", "s2", "--evaluator", "synthetic:7:0.3",
            "--generations", "15", "--seed", "3"]
    code1, out1, _ = run_cli(capsys, *args, "--out", str(a))
    code2, out2, _ = run_cli(capsys, *args, "--out", str(b))
    assert code1 == code2 == 0
    assert a.read_bytes() == b.read_bytes()
    s1, s2 = last_json(out1), last_json(out2)
    s1.pop("trace"), s2.pop("trace")
    assert s1 == s2


def test_search_snapshot_flags(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    code, _, _ = run_cli(
        capsys, "search", "--space", "s2", "--evaluator", "synthetic:0",
        "--generations", "3", "--seed", "0", "--out", str(out),
        "--snapshot-mean", "--snapshot-full-cov",
    )
    assert code == 0
    trace = driver.read_trace(out)
    assert trace.records[0].state is not None
    assert "cov" in trace.records[0].state
    assert "cov" in trace.final_state


def test_search_custom_space(tmp_path, capsys):
    space_file, spc = tiny_space_file(tmp_path)
    out = tmp_path / "t.jsonl"
    code, stdout, _ = run_cli(
        capsys, "search", "--space", f"custom:{space_file}",
        "--evaluator", "synthetic:5", "--generations", "10", "--seed", "0",
        "--out", str(out),
    )
    assert code == 0
    trace = driver.read_trace(out)
    assert trace.space == spc
    assert trace.dim == space.dimension(spc) == 6


def test_search_random_mode_fitness_in_range(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    code, stdout, _ = run_cli(
        capsys, "search", "--space", "s2", "--evaluator", "synthetic:7:0.3",
        "--mode", "random", "--generations", "10", "--seed", "4", "--out", str(out),
    )
    assert code == 0
    summary = last_json(stdout)
    assert summary["final_key"] == summary["best_key"]
    assert 0.0 <= summary["best_fitness"] <= 1.0


def test_search_workers_flag_output_identical(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    base = ["search", "--space", "s2", "--evaluator", "synthetic:7:0.3",
            "--generations", "15", "--seed", "6"]
    assert run_cli(capsys, *base, "--out", str(a))[0] == 0
    assert run_cli(capsys, *base, "--out", str(b), "--workers", "4")[0] == 0
    a_lines = a.read_text().strip().split("\n")
    b_lines = b.read_text().strip().split("\n")
    assert a_lines[1:] == b_lines[1:]  # header differs only in echoed config


# ------------------------------------------------------------- gen-bench


def test_gen_bench_materialize_and_agreement(tmp_path, capsys):
    space_file, spc = tiny_space_file(tmp_path)
    out = tmp_path / "bench.json"
    code, stdout, _ = run_cli(
        capsys, "gen-bench", "--space", f"custom:{space_file}", "--seed", "11",
        "--beta", "0.25", "--materialize", "--out", str(out),
    )
    assert code == 0
    assert last_json(stdout)["entries"] == 9
    bench = evaluators.load_benchmark(out)
    direct = evaluators.gen_synthetic(spc, seed=11, beta=0.25)
    for g in space.enumerate_genotypes(spc):
        assert bench.evaluate(g) == direct.evaluate(g)


def test_gen_bench_byte_stable(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["gen-bench", "--space", "s2", "--seed", "7", "--beta", "0.3"]
    assert run_cli(capsys, *args, "--out", str(a))[0] == 0
    assert run_cli(capsys, *args, "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_bench_reference_file_drives_search(tmp_path, capsys):
    """A non-materialized benchmark reconstructs the synthetic generator."""
    ref = tmp_path / "ref.json"
    assert run_cli(capsys, "gen-bench", "--space", "s2", "--seed", "7",
                   "--beta", "0.3", "--out", str(ref))[0] == 0
    via_ref = tmp_path / "a.jsonl"
    via_direct = tmp_path / "b.jsonl"
    base = ["search", "--space", "s2", "--generations", "10", "--seed", "2"]
    assert run_cli(capsys, *base, "--evaluator", f"tabular:{ref}",
                   "--out", str(via_ref))[0] == 0
    assert run_cli(capsys, *base, "--evaluator", "synthetic:7:0.3",
                   "--out", str(via_direct))[0] == 0
    assert via_ref.read_bytes() == via_direct.read_bytes()


def test_gen_bench_materialize_s1_exceeds_cap(tmp_path, capsys):
    code, _, stderr = run_cli(
        capsys, "gen-bench", "--space", "s1", "--seed", "0", "--materialize",
        "--out", str(tmp_path / "x.json"),
    )
    assert code == 2
    assert "error:" in stderr


# ------------------------------------------------------------- brute


def test_brute_stdout_and_ranking(tmp_path, capsys):
    space_file, spc = tiny_space_file(tmp_path)
    ranking = tmp_path / "rank.tsv"
    code, stdout, _ = run_cli(
        capsys, "brute", "--space", f"custom:{space_file}",
        "--evaluator", "synthetic:3", "--ranking-out", str(ranking),
    )
    assert code == 0
    key, fitness = stdout.strip().split("\t")
    assert float(fitness) == 1.0  # beta 0: argmax genotype normalizes to one
    space.parse_key(key, spc)
    lines = ranking.read_text().strip().split("\n")
    assert len(lines) == 9
    fits = [float(line.split("\t")[1]) for line in lines]
    assert fits == sorted(fits, reverse=True)
    assert lines[0].split("\t")[0] == key


def test_brute_s1_refused(tmp_path, capsys):
    code, _, stderr = run_cli(capsys, "brute", "--space", "s1",
                              "--evaluator", "synthetic:0")
    assert code == 2
    assert "error:" in stderr


# ------------------------------------------------------------- plot-data


@pytest.fixture()
def snap_trace(tmp_path, capsys):
    out = tmp_path / "snap.jsonl"
    code, _, _ = run_cli(
        capsys, "search", "--space", "s2", "--evaluator", "synthetic:7:0.3",
        "--generations", "30", "--seed", "0", "--out", str(out), "--snapshot-mean",
    )
    assert code == 0
    return out


def test_plot_data_all_kinds(tmp_path, capsys, snap_trace):
    expects = {"unique": "unique_per_gen", "mean": "mean_progression",
               "opfreq": "op_frequency", "cache": "cache_stats"}
    for which, kind in expects.items():
        out = tmp_path / f"{which}.json"
        code, stdout, _ = run_cli(
            capsys, "plot-data", "--trace", str(snap_trace),
            "--which", which, "--out", str(out),
        )
        assert code == 0
        assert last_json(stdout)["kind"] == kind
        assert analysis.load_plot_data(out).kind == kind


def test_plot_data_opfreq_conservation(tmp_path, capsys, snap_trace):
    out = tmp_path / "freq.json"
    code, _, _ = run_cli(
        capsys, "plot-data", "--trace", str(snap_trace), "--which", "opfreq",
        "--k", "20", "--out", str(out),
    )
    assert code == 0
    table = analysis.load_plot_data(out)
    assert sum(count for _, count in table.rows) == 120


def test_plot_data_mean_needs_snapshots(tmp_path, capsys):
    bare = tmp_path / "bare.jsonl"
    assert run_cli(capsys, "search", "--space", "s2", "--evaluator", "synthetic:0",
                   "--generations", "3", "--seed", "0", "--out", str(bare))[0] == 0
    code, _, stderr = run_cli(
        capsys, "plot-data", "--trace", str(bare), "--which", "mean",
        "--out", str(tmp_path / "m.json"),
    )
    assert code == 2
    assert "error:" in stderr and "snapshot" in stderr


# ------------------------------------------------------------- exit codes


def test_exit_code_taxonomy(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    config_errors = [
        ("search", "--space", "s9", "--evaluator", "synthetic:0",
         "--seed", "0", "--out", str(trace)),
        ("search", "--space", "s2", "--evaluator", "mystery:0",
         "--seed", "0", "--out", str(trace)),
        ("search", "--space", "s2", "--evaluator", "synthetic:zero",
         "--seed", "0", "--out", str(trace)),
        ("search", "--space", "s2", "--evaluator", "synthetic:0:-1",
         "--seed", "0", "--out", str(trace)),
        ("search", "--space", "s2", "--evaluator", "synthetic:0",
         "--seed", "0", "--generations", "-5", "--out", str(trace)),
        ("search", "--space", "s2", "--evaluator", "synthetic:0",
         "--seed", "0", "--workers", "0", "--out", str(trace)),
        ("search", "--space", "s2", "--evaluator", "synthetic:0",
         "--out", str(trace)),  # missing required --seed
        ("plot-data", "--trace", str(trace), "--which", "spiral",
         "--out", str(trace)),
        ("no-such-command",),
        (),
    ]
    for argv in config_errors:
        code, _, stderr = run_cli(capsys, *argv)
        assert code == 1, argv
        assert "error:" in stderr

    runtime_errors = [
        ("search", "--space", "s2", "--evaluator", f"tabular:{tmp_path}/absent.json",
         "--seed", "0", "--out", str(trace)),
        ("search", "--space", f"custom:{tmp_path}/absent_space.json",
         "--evaluator", "synthetic:0", "--seed", "0", "--out", str(trace)),
        ("search", "--space", "s2", "--evaluator", "synthetic:0", "--seed", "0",
         "--out", str(tmp_path / "no_dir" / "t.jsonl")),
        ("plot-data", "--trace", str(tmp_path / "absent.trace"), "--which", "unique",
         "--out", str(trace)),
    ]
    for argv in runtime_errors:
        code, _, stderr = run_cli(capsys, *argv)
        assert code == 2, argv
        assert "error:" in stderr


def test_malformed_benchmark_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{this is not json", encoding="utf-8")
    code, _, stderr = run_cli(
        capsys, "search", "--space", "s2", "--evaluator", f"tabular:{bad}",
        "--seed", "0", "--out", str(tmp_path / "t.jsonl"),
    )
    assert code == 2
    assert "error:" in stderr


def test_space_mismatch_exit_2(tmp_path, capsys):
    space_file, _ = tiny_space_file(tmp_path)
    bench = tmp_path / "tiny_bench.json"
    assert run_cli(capsys, "gen-bench", "--space", f"custom:{space_file}",
                   "--seed", "0", "--materialize", "--out", str(bench))[0] == 0
    code, _, stderr = run_cli(
        capsys, "search", "--space", "s2", "--evaluator", f"tabular:{bench}",
        "--seed", "0", "--out", str(tmp_path / "t.jsonl"),
    )
    assert code == 2
    assert "does not match" in stderr


def test_inputs_never_mutated(tmp_path, capsys):
    bench = tmp_path / "bench.json"
    assert run_cli(capsys, "gen-bench", "--space", "s2", "--seed", "7",
                   "--beta", "0.3", "--out", str(bench))[0] == 0
    bench_bytes = bench.read_bytes()
    trace = tmp_path / "t.jsonl"
    assert run_cli(capsys, "search", "--space", "s2",
                   "--evaluator", f"tabular:{bench}", "--generations", "10",
                   "--seed", "0", "--out", str(trace), "--snapshot-mean")[0] == 0
    assert bench.read_bytes() == bench_bytes
    trace_bytes = trace.read_bytes()
    assert run_cli(capsys, "plot-data", "--trace", str(trace), "--which", "mean",
                   "--out", str(tmp_path / "m.json"))[0] == 0
    assert trace.read_bytes() == trace_bytes


# ------------------------------------------------------- paired example


def test_paired_mode_comparison_over_twenty_seeds(tmp_path, capsys):
    """Random mode's summary fitness <= the cmaes run's on >= 60% of seeds
    and on the mean, at matched budgets."""
    best = {"cmaes": [], "random": []}
    for seed in range(20):
        for mode in ("cmaes", "random"):
            out = tmp_path / f"{mode}_{seed}.jsonl"
            code, stdout, _ = run_cli(
                capsys, "search", "--space", "s2", "--evaluator", "synthetic:7:0.3",
                "--mode", mode, "--generations", "100", "--seed", str(seed),
                "--out", str(out),
            )
            assert code == 0
            best[mode].append(last_json(stdout)["best_fitness"])
    wins = sum(r <= c for c, r in zip(best["cmaes"], best["random"]))
    assert wins >= 12, f"random beat cmaes on {20 - wins}/20 seeds"
    assert float(np.mean(best["random"])) <= float(np.mean(best["cmaes"]))
