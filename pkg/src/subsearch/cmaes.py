"""CMA-ES over the subspace increment with an ask/tell interface,
fixed-noise fitness batches, and global-best tracking.

Minimization convention throughout. Parameter defaults follow the standard
tutorial formulas; the eigendecomposition of C is refreshed lazily.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EvaluationError
from .numerics import RngStream
from .objectives import NoiseKey, Objective, check_finite
from .subspace import Projection, compose

EIG_FLOOR = 1e-20  # relative eigenvalue clamp keeping C positive-definite


@dataclass
class CmaParams:
    K: int
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    d: int
    sigma0: float

    def __post_init__(self):
        if self.K < 4:
            raise ConfigError("CmaParams: need K >= 4")
        if not 1 <= self.mu <= self.K // 2:
            raise ConfigError("CmaParams: need 1 <= mu <= K/2")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w <= 0) or np.any(np.diff(w) > 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError("CmaParams: weights must be positive, "
                              "non-increasing, and sum to 1")
        if self.c_1 + self.c_mu > 1.0:
            raise ConfigError("CmaParams: need c_1 + c_mu <= 1")
        for name in ("c_sigma", "c_c", "c_1", "c_mu"):
            rate = getattr(self, name)
            if not 0 < rate <= 1:
                raise ConfigError(f"CmaParams: rate {name} out of (0, 1]")
        self.weights = w

    @property
    def chi_n(self) -> float:
        """Closed-form surrogate for E||N(0, I_d)||."""
        d = self.d
        return math.sqrt(d) * (1.0 - 1.0 / (4 * d) + 1.0 / (21 * d * d))

    @property
    def eig_interval(self) -> int:
        return max(1, int(1.0 / (10.0 * self.d * (self.c_1 + self.c_mu))))


def default_params(d: int, K: int = 30, sigma0: float = 0.5) -> CmaParams:
    if d < 1:
        raise ConfigError("default_params: need d >= 1")
    if K < 4:
        raise ConfigError("default_params: need K >= 4")
    mu = K // 2
    raw = np.log((K + 1) / 2.0) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / float(np.sum(weights ** 2))
    c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (d + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d)
    c_1 = 2.0 / ((d + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1,
               2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0) ** 2 + mu_eff))
    return CmaParams(K=K, mu=mu, weights=weights, mu_eff=mu_eff,
                     c_sigma=c_sigma, d_sigma=d_sigma, c_c=c_c,
                     c_1=c_1, c_mu=c_mu, d=d, sigma0=sigma0)


@dataclass
class CmaState:
    m: np.ndarray
    sigma: float
    C: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    generation: int = 0
    evals: int = 0
    best_q: np.ndarray | None = None
    best_f: float = math.inf
    best_found_at_eval: int = 0
    # eigendecomposition cache of C
    eig_B: np.ndarray = field(default=None, repr=False)
    eig_sqrt: np.ndarray = field(default=None, repr=False)
    eig_gen: int = -1


def init_state(params: CmaParams, m0: np.ndarray | None = None) -> CmaState:
    m = np.zeros(params.d) if m0 is None else np.asarray(m0, dtype=float).copy()
    if m.size != params.d:
        raise ValueError("init_state: m0 dimension mismatch")
    if params.sigma0 <= 0:
        raise ConfigError("init_state: sigma0 must be positive")
    return CmaState(m=m, sigma=params.sigma0, C=np.eye(params.d),
                    p_sigma=np.zeros(params.d), p_c=np.zeros(params.d))


def _refresh_eig(state: CmaState, params: CmaParams, force: bool = False):
    stale = state.eig_gen < 0 or (state.generation - state.eig_gen) >= params.eig_interval
    if not (stale or force):
        return
    state.C = (state.C + state.C.T) / 2.0
    vals, vecs = np.linalg.eigh(state.C)
    floor = EIG_FLOOR * float(vals.max())
    if vals[0] < floor:
        vals = np.maximum(vals, floor)
        state.C = (vecs * vals) @ vecs.T
    if not np.all(vals > 0):
        raise EvaluationError("cmaes: covariance not positive-definite after repair")
    state.eig_B = vecs
    state.eig_sqrt = np.sqrt(vals)
    state.eig_gen = state.generation


def ask(state: CmaState, params: CmaParams, rng: RngStream) -> np.ndarray:
    """K candidates Q_i = m + sigma * B * sqrt(lambda) * z_i, shape (K, d)."""
    _refresh_eig(state, params)
    z = rng.normal(params.K, params.d)
    y = (z * state.eig_sqrt) @ state.eig_B.T
    return state.m + state.sigma * y


def tell(state: CmaState, params: CmaParams, candidates: np.ndarray,
         fitnesses) -> CmaState:
    """Rank-based update of (m, p_sigma, p_c, sigma, C) plus best tracking.

    Ascending ranking with ties broken by candidate index; state is updated
    in place and returned.
    """
    candidates = np.asarray(candidates, dtype=float)
    f = np.asarray(fitnesses, dtype=float)
    if candidates.shape != (params.K, params.d) or f.size != params.K:
        raise ValueError("tell: need K candidates and K fitness values")
    check_finite(f, "tell")
    _refresh_eig(state, params)  # guard: first tell without a prior ask

    order = np.argsort(f, kind="stable")
    sel = candidates[order[: params.mu]]
    m_old = state.m
    y = (sel - m_old) / state.sigma
    y_w = params.weights @ y
    state.m = m_old + state.sigma * y_w

    inv_sqrt_yw = state.eig_B @ ((state.eig_B.T @ y_w) / state.eig_sqrt)
    cs = params.c_sigma
    state.p_sigma = ((1.0 - cs) * state.p_sigma
                     + math.sqrt(cs * (2.0 - cs) * params.mu_eff) * inv_sqrt_yw)
    ps_norm = float(np.linalg.norm(state.p_sigma))
    denom = math.sqrt(1.0 - (1.0 - cs) ** (2 * (state.generation + 1)))
    h_sigma = 1.0 if ps_norm / denom < (1.4 + 2.0 / (params.d + 1)) * params.chi_n else 0.0

    cc = params.c_c
    state.p_c = ((1.0 - cc) * state.p_c
                 + h_sigma * math.sqrt(cc * (2.0 - cc) * params.mu_eff) * y_w)

    c1, cmu = params.c_1, params.c_mu
    rank_mu = y.T @ (params.weights[:, None] * y)
    state.C = ((1.0 - c1 - cmu) * state.C
               + c1 * (np.outer(state.p_c, state.p_c)
                       + (1.0 - h_sigma) * cc * (2.0 - cc) * state.C)
               + cmu * rank_mu)
    state.C = (state.C + state.C.T) / 2.0

    state.sigma *= math.exp((cs / params.d_sigma) * (ps_norm / params.chi_n - 1.0))

    i_best = int(order[0])
    if f[i_best] < state.best_f:
        state.best_f = float(f[i_best])
        state.best_q = candidates[i_best].copy()
        state.best_found_at_eval = state.evals + i_best + 1
    state.generation += 1
    state.evals += params.K
    return state


@dataclass
class TraceRecord:
    gen: int
    evals: int
    f_best_gen: float
    f_star: float
    sigma: float
    m_norm: float
    c_cond: float
    ms: int


def optimize(objective: Objective, e0: np.ndarray, proj: Projection,
             params: CmaParams, budget: int, noise_policy: str = "per-generation",
             rng: RngStream | None = None, wallclock: bool = False):
    """Full ask/compose/evaluate/tell loop until the evaluation budget.

    One noise key per generation; every candidate of a generation is scored
    under the same key. Returns (Q_star, e_star, trace); on objective failure
    the partial trace is attached to the raised error.
    """
    if budget < params.K:
        raise ConfigError("optimize: budget must be at least one generation (K)")
    if noise_policy not in ("per-generation", "pinned-global"):
        raise ConfigError(f"optimize: unknown noise policy {noise_policy!r}")
    rng = rng if rng is not None else RngStream(0)
    key_rng = rng.substream("noise-keys")
    tokens = np.atleast_2d(np.asarray(e0, dtype=float)).shape[0]
    if params.d % tokens != 0 or params.d // tokens != proj.d:
        raise ValueError("optimize: params.d must equal tokens * proj.d")

    state = init_state(params)
    trace: list[TraceRecord] = []
    pinned = NoiseKey(key_rng.raw64(), key_rng.raw64())
    try:
        while state.evals + params.K <= budget:
            started = time.perf_counter()
            if noise_policy == "per-generation":
                key = NoiseKey(key_rng.raw64(), key_rng.raw64())
            else:
                key = pinned
            flat_q = ask(state, params, rng)
            embeddings = [compose(e0, proj, q.reshape(tokens, proj.d)
                                  if tokens > 1 else q) for q in flat_q]
            fitnesses = objective.batch_evaluate(embeddings, key)
            check_finite(fitnesses, "optimize")
            tell(state, params, flat_q, fitnesses)
            cond = float((state.eig_sqrt.max() / state.eig_sqrt.min()) ** 2)
            ms = int(round((time.perf_counter() - started) * 1000)) if wallclock else 0
            trace.append(TraceRecord(
                gen=state.generation, evals=state.evals,
                f_best_gen=float(np.min(fitnesses)), f_star=state.best_f,
                sigma=state.sigma, m_norm=float(np.linalg.norm(state.m)),
                c_cond=cond, ms=ms))
    except EvaluationError as err:
        err.partial_trace = trace
        raise
    q_star = state.best_q.reshape(tokens, proj.d) if tokens > 1 else state.best_q
    e_star = compose(e0, proj, q_star)
    return q_star, e_star, trace
