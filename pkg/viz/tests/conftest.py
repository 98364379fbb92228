"""Shared fixtures: real exported tables, produced through the search CLI.

The renderer only ever sees files, so the fixtures call the producing tool as
a subprocess rather than importing it; that keeps this package honest about
consuming nothing but the exported JSON schema.
"""

from __future__ import annotations

import subprocess
import sys

import pytest


def run_producer(*args: str) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "cellsearch.cli", *args],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, f"{args}: {proc.stderr}"


@pytest.fixture(scope="session")
def exports(tmp_path_factory):
    root = tmp_path_factory.mktemp("exports")
    traces = {}
    for seed in (0, 1, 2):
        trace = root / f"trace_{seed}.jsonl"
        run_producer(
            "search", "--space", "s2", "--evaluator", "synthetic:7:0.3",
            "--mode", "cmaes", "--generations", "100", "--seed", str(seed),
            "--snapshot-mean", "--out", str(trace),
        )
        traces[seed] = trace
    paths = {"dir": root, "traces": traces, "unique": {}, "cache": {}, "opfreq": {}}
    for seed, trace in traces.items():
        for which, bucket in (("unique", "unique"), ("cache", "cache"),
                              ("opfreq", "opfreq")):
            out = root / f"{which}_{seed}.json"
            run_producer("plot-data", "--trace", str(trace), "--which", which,
                         "--out", str(out))
            paths[bucket][seed] = out
    mean = root / "mean_0.json"
    run_producer("plot-data", "--trace", str(traces[0]), "--which", "mean",
                 "--out", str(mean))
    paths["mean"] = mean
    return paths
