"""Covariance matrix adaptation evolution strategy, maximization convention.

Pure state-transition functions over an immutable distribution state: sample a
population from N(m, sigma^2 C), rank by fitness descending, then recombine
the mean, adapt the step size through the conjugate evolution path, and update
the covariance with the rank-one and rank-mu terms.  No objective function
lives here; callers supply fitness values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonFiniteFitnessError(ValueError):
    """A fitness value was NaN or infinite; the evaluator is broken."""


@dataclass(frozen=True)
class CmaParams:
    """Strategy constants for a fixed dimension.

    Formulas follow the standard default parameterization; weights are the
    positive log-rank weights over the best half of the population.
    """

    n: int
    n_pop: int
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if self.n_pop < 2:
            raise ValueError("population size must be at least 2")
        if not (1 <= self.mu <= self.n_pop):
            raise ValueError("mu out of range")
        w = np.asarray(self.weights, dtype=float).copy()
        if w.shape != (self.mu,):
            raise ValueError("weights length must equal mu")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to one")
        if np.any(np.diff(w) > 0):
            raise ValueError("weights must be non-increasing")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        for name in ("c_sigma", "c_c"):
            val = getattr(self, name)
            if not 0.0 < val < 1.0:
                raise ValueError(f"{name}={val} outside (0, 1)")
        if self.c_1 < 0 or self.c_mu < 0 or self.c_1 + self.c_mu > 1.0 + 1e-12:
            raise ValueError("need c_1, c_mu >= 0 and c_1 + c_mu <= 1")
        if self.d_sigma < 1.0:
            raise ValueError("d_sigma must be at least 1")


def default_params(n: int, n_pop: int | None = None) -> CmaParams:
    """Standard defaults for dimension ``n``; population 4 + floor(3 ln n)."""
    if n < 1:
        raise ValueError("dimension must be positive")
    if n_pop is None:
        n_pop = 4 + int(3 * np.log(n))
    if n_pop < 2:
        raise ValueError("population size must be at least 2")
    mu = n_pop // 2
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / float(np.sum(weights**2))
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, np.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(
        1.0 - c_1,
        2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff),
    )
    chi_n = np.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n**2))
    return CmaParams(
        n=n,
        n_pop=int(n_pop),
        mu=mu,
        weights=weights,
        mu_eff=mu_eff,
        c_sigma=float(c_sigma),
        d_sigma=float(d_sigma),
        c_c=float(c_c),
        c_1=float(c_1),
        c_mu=float(c_mu),
        chi_n=float(chi_n),
    )


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CmaState:
    """Search distribution state after ``generation`` completed updates.

    ``eig`` caches (B, D) with C = B diag(D^2) B^T so sampling and the
    inverse-root transform reuse one decomposition per generation.
    """

    m: np.ndarray
    C: np.ndarray
    sigma: float
    p_sigma: np.ndarray
    p_c: np.ndarray
    eig: tuple[np.ndarray, np.ndarray]
    generation: int

    def __post_init__(self) -> None:
        n = np.asarray(self.m).shape[0]
        object.__setattr__(self, "m", _frozen(self.m))
        object.__setattr__(self, "C", _frozen(self.C))
        object.__setattr__(self, "p_sigma", _frozen(self.p_sigma))
        object.__setattr__(self, "p_c", _frozen(self.p_c))
        B, D = self.eig
        object.__setattr__(self, "eig", (_frozen(B), _frozen(D)))
        if self.C.shape != (n, n):
            raise ValueError("covariance shape does not match mean")
        if self.sigma <= 0 or not np.isfinite(self.sigma):
            raise ValueError("sigma must be positive and finite")
        if self.generation < 0:
            raise ValueError("generation must be non-negative")

    @property
    def n(self) -> int:
        return self.m.shape[0]


def init_state(n: int, sigma0: float = 0.5) -> CmaState:
    """Zero mean, identity covariance, zero paths, generation 0."""
    eye = np.eye(n)
    return CmaState(
        m=np.zeros(n),
        C=eye,
        sigma=float(sigma0),
        p_sigma=np.zeros(n),
        p_c=np.zeros(n),
        eig=(eye.copy(), np.ones(n)),
        generation=0,
    )


def eig_sym(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a symmetric PSD matrix to (B, D), C ~= B diag(D^2) B^T.

    Rejects input whose asymmetry exceeds 1e-12 relative to max(1, |C|_inf),
    symmetrizes what remains, and floors eigenvalues at 1e-14 times the
    largest so D stays strictly positive even for rank-deficient input.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(C))) if C.size else 1.0)
    asym = float(np.max(np.abs(C - C.T))) if C.size else 0.0
    if asym > 1e-12 * scale:
        raise ValueError(f"matrix asymmetry {asym:g} exceeds tolerance")
    sym = (C + C.T) / 2.0
    vals, B = np.linalg.eigh(sym)
    floor = 1e-14 * max(float(vals[-1]), np.finfo(float).tiny)
    vals = np.maximum(vals, floor)
    return B, np.sqrt(vals)


def sample_population(
    state: CmaState, params: CmaParams, rng: np.random.Generator
) -> np.ndarray:
    """Draw n_pop rows x_i = m + sigma * B (D * z_i), z_i ~ N(0, I)."""
    B, D = state.eig
    Z = rng.standard_normal((params.n_pop, params.n))
    return state.m + state.sigma * (Z * D) @ B.T


def rank_descending(fitnesses) -> np.ndarray:
    """Indices sorted by fitness descending; ties keep original order."""
    f = np.asarray(fitnesses, dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteFitnessError("fitness contains NaN or infinity")
    return np.argsort(-f, kind="stable")


def update_mean(state: CmaState, params: CmaParams, ranked: np.ndarray) -> np.ndarray:
    """Weighted recombination of the mu best samples (rows of ``ranked``)."""
    ranked = np.asarray(ranked, dtype=float)
    if ranked.shape[0] < params.mu or ranked.shape[1] != params.n:
        raise ValueError("ranked population shape mismatch")
    return params.weights @ ranked[: params.mu]


def update_step_size(
    state: CmaState, params: CmaParams, m_old: np.ndarray, m_new: np.ndarray
) -> tuple[np.ndarray, float]:
    """Conjugate path update and the resulting step size.

    The mean shift is whitened by C^(-1/2) = B diag(1/D) B^T so path length
    compares against the expected norm chi_n of a standard normal vector.
    """
    B, D = state.eig
    shift = (np.asarray(m_new) - np.asarray(m_old)) / state.sigma
    white = B @ ((B.T @ shift) / D)
    cs = params.c_sigma
    p_new = (1.0 - cs) * state.p_sigma + np.sqrt(cs * (2.0 - cs) * params.mu_eff) * white
    arg = (cs / params.d_sigma) * (np.linalg.norm(p_new) / params.chi_n - 1.0)
    return p_new, float(state.sigma * np.exp(arg))


def update_covariance(
    state: CmaState,
    params: CmaParams,
    ranked: np.ndarray,
    m_old: np.ndarray,
    p_sigma_new: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Rank-one plus rank-mu covariance update with the stall correction.

    The indicator h drops the rank-one accumulation while the step-size path
    is still inflated, and the (1 - h) term repairs the small variance loss
    that the stalled path would otherwise cause.
    """
    ranked = np.asarray(ranked, dtype=float)
    m_old = np.asarray(m_old, dtype=float)
    m_new = update_mean(state, params, ranked)
    cs, cc = params.c_sigma, params.c_c
    g = state.generation
    # normalize away the path's warm-up bias before comparing against chi_n
    denom = np.sqrt(1.0 - (1.0 - cs) ** (2 * (g + 1)))
    h = 1.0 if np.linalg.norm(p_sigma_new) / denom < (1.4 + 2.0 / (params.n + 1.0)) * params.chi_n else 0.0
    p_c_new = (1.0 - cc) * state.p_c + h * np.sqrt(cc * (2.0 - cc) * params.mu_eff) * (
        (m_new - m_old) / state.sigma
    )
    Y = (ranked[: params.mu] - m_old) / state.sigma
    rank_mu = (params.weights[:, None] * Y).T @ Y
    C_new = (
        (1.0 - params.c_1 - params.c_mu) * state.C
        + params.c_1 * (np.outer(p_c_new, p_c_new) + (1.0 - h) * cc * (2.0 - cc) * state.C)
        + params.c_mu * rank_mu
    )
    C_new = (C_new + C_new.T) / 2.0
    return p_c_new, C_new


def step(
    state: CmaState,
    params: CmaParams,
    population: np.ndarray,
    fitnesses,
) -> CmaState:
    """One full generation update from an evaluated population."""
    population = np.asarray(population, dtype=float)
    if population.shape != (params.n_pop, params.n):
        raise ValueError(
            f"population shape {population.shape} != ({params.n_pop}, {params.n})"
        )
    f = np.asarray(fitnesses, dtype=float)
    if f.shape != (params.n_pop,):
        raise ValueError("fitness length does not match population")
    order = rank_descending(f)
    ranked = population[order]
    m_new = update_mean(state, params, ranked)
    p_sigma_new, sigma_new = update_step_size(state, params, state.m, m_new)
    p_c_new, C_new = update_covariance(state, params, ranked, state.m, p_sigma_new)
    return CmaState(
        m=m_new,
        C=C_new,
        sigma=sigma_new,
        p_sigma=p_sigma_new,
        p_c=p_c_new,
        eig=eig_sym(C_new),
        generation=state.generation + 1,
    )


def state_snapshot(state: CmaState, full_cov: bool = False) -> dict:
    """JSON-ready view of the distribution: m, sigma, diag(C), optionally C."""
    snap: dict = {
        "m": [float(v) for v in state.m],
        "sigma": float(state.sigma),
        "cov_diag": [float(v) for v in np.diag(state.C)],
    }
    if full_cov:
        snap["cov"] = [[float(v) for v in row] for row in state.C]
    return snap
