"""Derivative-free search over cell-based architecture spaces with CMA-ES."""

from .analysis import (
    PlotData,
    cache_stats,
    mean_progression,
    top_k_op_frequency,
    unique_per_generation,
)
from .cmaes import CmaParams, CmaState, default_params, init_state, step
from .driver import (
    SearchConfig,
    Trace,
    read_trace,
    run_cmaes,
    run_random,
    run_search,
    write_trace,
)
from .evaluators import (
    AFTable,
    SyntheticBenchmark,
    TabularBenchmark,
    brute_force_best,
    gen_synthetic,
    load_benchmark,
    save_benchmark,
)
from .space import (
    ArchParam,
    CellSpec,
    Genotype,
    OperationSet,
    SearchSpaceSpec,
    canonical_key,
    dimension,
    discretize,
    map_to_genotype,
    parse_key,
    s1_space,
    s2_space,
    softmax_rows,
)

__version__ = "0.1.0"

__all__ = [
    "AFTable",
    "ArchParam",
    "CellSpec",
    "CmaParams",
    "CmaState",
    "Genotype",
    "OperationSet",
    "PlotData",
    "SearchConfig",
    "SearchSpaceSpec",
    "SyntheticBenchmark",
    "TabularBenchmark",
    "Trace",
    "brute_force_best",
    "cache_stats",
    "canonical_key",
    "default_params",
    "dimension",
    "discretize",
    "gen_synthetic",
    "init_state",
    "load_benchmark",
    "map_to_genotype",
    "mean_progression",
    "parse_key",
    "read_trace",
    "run_cmaes",
    "run_random",
    "run_search",
    "s1_space",
    "s2_space",
    "save_benchmark",
    "softmax_rows",
    "step",
    "top_k_op_frequency",
    "unique_per_generation",
    "write_trace",
]
