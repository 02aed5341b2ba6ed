"""Reference optimizers that consume the same black-box reward interface.

Every method sees only a callable from embedding to reward plus a domain
sampler, and may not exceed its query budget; the BudgetedReward wrapper
enforces the accounting. Included: uniform random search, Gaussian-process
Bayesian optimization with UCB or expected improvement over a sampled
candidate pool, and a standard covariance-matrix-adaptation evolution
strategy with cumulative step-size control.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import norm as _norm

from .core import RngHandle
from .surrogate import gp_fit, gp_posterior

__all__ = [
    "BudgetedReward",
    "UnitSphereSampler",
    "RunResult",
    "random_search",
    "BOConfig",
    "run_bo",
    "CmaConfig",
    "run_cmaes",
]

EmbeddingRewardFn = Callable[[np.ndarray], float]


class BudgetedReward:
    """Counts queries and refuses any call beyond the budget."""

    def __init__(self, fn: EmbeddingRewardFn, budget: int):
        if budget < 1:
            raise ValueError("budget must be at least 1")
        self.fn = fn
        self.budget = int(budget)
        self.calls = 0

    def __call__(self, z: np.ndarray) -> float:
        if self.calls >= self.budget:
            raise RuntimeError(f"query budget of {self.budget} exhausted")
        self.calls += 1
        return float(self.fn(np.asarray(z, dtype=np.float64)))

    @property
    def remaining(self) -> int:
        return self.budget - self.calls


class UnitSphereSampler:
    """Uniform directions on the unit sphere in a fixed dimension."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be at least 1")
        self.dim = int(dim)

    def __call__(self, rng: RngHandle) -> np.ndarray:
        return self.batch(rng, 1)[0]

    def batch(self, rng: RngHandle, n: int) -> np.ndarray:
        z = rng.gen.standard_normal((n, self.dim))
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return z / norms


@dataclass
class RunResult:
    """Outcome of one optimizer run under a fixed budget."""

    best_z: np.ndarray
    best_reward: float
    curve: list[float] = field(default_factory=list)  # best-so-far per query
    n_calls: int = 0


def _track(curve: list[float], best: float, r: float) -> float:
    best = max(best, r)
    curve.append(best)
    return best


def random_search(reward_fn: EmbeddingRewardFn, sampler, budget: int,
                  rng: RngHandle) -> RunResult:
    """Uniform exploration; the baseline every method must justify itself against."""
    wrapped = BudgetedReward(reward_fn, budget)
    zs = sampler.batch(rng, budget)
    best, best_z, curve = -math.inf, zs[0], []
    for z in zs:
        r = wrapped(z)
        if r > best:
            best, best_z = r, z
        curve.append(best)
    return RunResult(best_z=np.asarray(best_z), best_reward=best,
                     curve=curve, n_calls=wrapped.calls)


@dataclass(frozen=True)
class BOConfig:
    """Pool-based Bayesian optimization settings.

    Each step refits the GP from scratch on everything observed (median
    lengthscale heuristic included), scores a freshly sampled candidate
    pool with the acquisition, and queries the argmax.
    """

    pool_size: int = 1024
    n_init: int = 2
    acquisition: str = "ucb"  # or "ei"
    kappa: float = 2.0
    lam: float = 1e-3
    sigma2: float = 1.0

    def validate(self) -> None:
        if self.pool_size < 1:
            raise ValueError("pool_size must be at least 1")
        if self.n_init < 1:
            raise ValueError("n_init must be at least 1")
        if self.acquisition not in ("ucb", "ei"):
            raise ValueError(f"unknown acquisition: {self.acquisition!r}")
        if self.kappa < 0.0:
            raise ValueError("kappa must be non-negative")


def expected_improvement(mean: np.ndarray, var: np.ndarray,
                         best: float) -> np.ndarray:
    """Closed-form EI for maximization; zero-variance points fall back to max(gain, 0)."""
    std = np.sqrt(var)
    gain = mean - best
    out = np.maximum(gain, 0.0)
    pos = std > 0.0
    g = gain[pos] / std[pos]
    out[pos] = gain[pos] * _norm.cdf(g) + std[pos] * _norm.pdf(g)
    return out


def run_bo(reward_fn: EmbeddingRewardFn, sampler, budget: int,
           rng: RngHandle, config: BOConfig = BOConfig()) -> RunResult:
    config.validate()
    wrapped = BudgetedReward(reward_fn, budget)
    n_init = min(config.n_init, budget)
    zs = list(sampler.batch(rng, n_init))
    ys = []
    best, best_z, curve = -math.inf, zs[0], []
    for z in zs:
        r = wrapped(z)
        ys.append(r)
        if r > best:
            best, best_z = r, z
        curve.append(best)
    while wrapped.remaining > 0:
        model = gp_fit(np.stack(zs), np.asarray(ys),
                       sigma2=config.sigma2, lam=config.lam)
        pool = sampler.batch(rng, config.pool_size)
        mean, var = gp_posterior(model, pool)
        if config.acquisition == "ucb":
            acq = mean + config.kappa * np.sqrt(var)
        else:
            acq = expected_improvement(mean, var, best)
        z_next = pool[int(np.argmax(acq))]
        r = wrapped(z_next)
        zs.append(z_next)
        ys.append(r)
        if r > best:
            best, best_z = r, z_next
        curve.append(best)
    return RunResult(best_z=np.asarray(best_z), best_reward=best,
                     curve=curve, n_calls=wrapped.calls)


@dataclass(frozen=True)
class CmaConfig:
    """Standard strategy parameters; population defaults to 4 + 3 ln(dim)."""

    sigma0: float = 0.5
    population: int | None = None

    def lam(self, dim: int) -> int:
        if self.population is not None:
            return max(2, int(self.population))
        return 4 + int(3 * math.log(dim))


def run_cmaes(reward_fn: EmbeddingRewardFn, sampler, budget: int,
              rng: RngHandle, config: CmaConfig = CmaConfig(),
              dim: int | None = None) -> RunResult:
    """Covariance matrix adaptation ES (maximizing), capped at `budget` calls.

    Rank-one and rank-mu covariance updates with cumulative step-size
    adaptation; a trailing partial generation is evaluated for best-so-far
    tracking but does not update the strategy state.
    """
    wrapped = BudgetedReward(reward_fn, budget)
    x0 = sampler(rng)
    n = int(dim) if dim is not None else int(x0.size)
    lam = config.lam(n)
    mu = lam // 2
    w_prime = np.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
    weights = w_prime / w_prime.sum()
    mu_eff = 1.0 / float(np.sum(weights ** 2))
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1,
               2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n ** 2))

    mean = np.asarray(x0, dtype=np.float64).copy()
    sigma = float(config.sigma0)
    cov = np.eye(n)
    p_sigma = np.zeros(n)
    p_c = np.zeros(n)
    best, best_z, curve = -math.inf, mean.copy(), []
    gen_count = 0

    while wrapped.remaining > 0:
        vals, unit = np.linalg.eigh(cov)
        vals = np.maximum(vals, 1e-20)
        d = np.sqrt(vals)
        take = min(lam, wrapped.remaining)
        raw = rng.gen.standard_normal((lam, n))
        ys = raw @ np.diag(d) @ unit.T  # N(0, C) draws
        xs = mean[None, :] + sigma * ys
        rewards = np.empty(take)
        for i in range(take):
            rewards[i] = wrapped(xs[i])
            if rewards[i] > best:
                best, best_z = rewards[i], xs[i].copy()
            curve.append(best)
        if take < lam:
            break  # partial generation: budget spent, no strategy update
        gen_count += 1
        order = np.argsort(-rewards)
        y_sel = ys[order[:mu]]
        y_w = weights @ y_sel
        mean = mean + sigma * y_w

        inv_sqrt = unit @ np.diag(1.0 / d) @ unit.T
        p_sigma = ((1.0 - c_sigma) * p_sigma
                   + math.sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * (inv_sqrt @ y_w))
        sigma = sigma * math.exp((c_sigma / d_sigma)
                                 * (np.linalg.norm(p_sigma) / chi_n - 1.0))
        h_denom = math.sqrt(1.0 - (1.0 - c_sigma) ** (2 * gen_count))
        h_sigma = float(np.linalg.norm(p_sigma) / h_denom
                        < (1.4 + 2.0 / (n + 1.0)) * chi_n)
        p_c = ((1.0 - c_c) * p_c
               + h_sigma * math.sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w)
        rank_one = np.outer(p_c, p_c)
        rank_mu = (y_sel.T * weights) @ y_sel
        cov = ((1.0 - c_1 - c_mu) * cov
               + c_1 * (rank_one + (1.0 - h_sigma) * c_c * (2.0 - c_c) * cov)
               + c_mu * rank_mu)
        cov = 0.5 * (cov + cov.T)

    return RunResult(best_z=np.asarray(best_z), best_reward=best,
                     curve=curve, n_calls=wrapped.calls)
