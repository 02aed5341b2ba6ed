"""Gaussian-process surrogate over embedding space and gradient guidance.

The surrogate keeps a squared-exponential GP over observed (embedding,
scaled reward) pairs. Its posterior mean has a closed-form gradient, and one
gradient step from a candidate embedding yields the pseudo-target that steers
the generator. Observations append via a rank-one Cholesky extension, so the
closed loop never refits from scratch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.spatial.distance import pdist

from .core import check_scores

__all__ = [
    "GuidanceConfig",
    "GPModel",
    "gp_fit",
    "gp_mean",
    "gp_mean_gradient",
    "gp_append",
    "pseudo_target",
    "scale_reward",
    "eta_schedule",
    "median_lengthscale",
    "gp_posterior",
]

MAX_OBSERVATIONS = 5000


@dataclass(frozen=True)
class GuidanceConfig:
    """Step-size schedule and reward scaling for gradient guidance.

    eta decays linearly from eta0 to eta_min (default one tenth of eta0)
    over a run. mode "ascent" walks up the surrogate mean toward higher
    reward; "descent" keeps the sign-literal downhill step as a variant.
    """

    eta0: float = 1.0
    eta_min: float | None = None
    gamma: float = 10.0
    mode: str = "ascent"

    def __post_init__(self):
        if self.eta0 < 0.0:
            raise ValueError("eta0 must be non-negative")
        if self.eta_min is not None and self.eta_min < 0.0:
            raise ValueError("eta_min must be non-negative")
        if self.mode not in ("ascent", "descent"):
            raise ValueError(f"unknown guidance mode: {self.mode!r}")

    @property
    def eta_floor(self) -> float:
        return 0.1 * self.eta0 if self.eta_min is None else self.eta_min


def eta_schedule(config: GuidanceConfig, t: int, t_max: int) -> float:
    """Linear decay from eta0 at t=0 to the floor at t=t_max."""
    if t_max <= 0:
        return config.eta0
    frac = min(max(t / t_max, 0.0), 1.0)
    return config.eta0 + (config.eta_floor - config.eta0) * frac


def scale_reward(sim: float, gamma: float = 10.0) -> float:
    """Stretch a similarity before it enters the GP's target vector."""
    return float(gamma) * float(sim)


def median_lengthscale(z: np.ndarray) -> float:
    """Median pairwise distance heuristic; 1.0 when points coincide."""
    z = np.asarray(z, dtype=np.float64)
    if len(z) < 2:
        return 1.0
    med = float(np.median(pdist(z)))
    return med if med > 0.0 else 1.0


@dataclass(frozen=True, eq=False)
class GPModel:
    """Immutable fitted state: data, kernel params, Cholesky factor, weights."""

    z: np.ndarray          # (n, dim) observed embeddings
    y: np.ndarray          # (n,) scaled rewards
    sigma2: float          # kernel variance
    lengthscale: float
    lam: float             # diagonal jitter added to the kernel
    chol: np.ndarray       # lower-triangular factor of K + lam*I
    alpha: np.ndarray      # (K + lam*I)^{-1} y

    @property
    def n(self) -> int:
        return len(self.y)


def _kernel_matrix(z: np.ndarray, sigma2: float, lengthscale: float) -> np.ndarray:
    sq = np.sum(z ** 2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (z @ z.T)
    np.maximum(d2, 0.0, out=d2)
    return sigma2 * np.exp(-d2 / (2.0 * lengthscale ** 2))


def _kernel_vector(model: GPModel, query: np.ndarray) -> np.ndarray:
    diff = model.z - query[None, :]
    d2 = np.sum(diff ** 2, axis=1)
    return model.sigma2 * np.exp(-d2 / (2.0 * model.lengthscale ** 2))


def gp_fit(z: np.ndarray, y: np.ndarray, sigma2: float = 1.0,
           lengthscale: float | None = None, lam: float = 1e-3) -> GPModel:
    """Fit the GP: build K, factor K + lam*I, solve for the weight vector.

    lengthscale=None selects the median pairwise-distance heuristic.
    Refuses more than 5000 observations (the solve is cubic) and surfaces
    a factorization failure as a ValueError.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or len(z) == 0:
        raise ValueError("observations must be a non-empty (n, dim) array")
    y = check_scores(np.asarray(y, dtype=np.float64))
    if len(y) != len(z):
        raise ValueError("one target per observation required")
    if len(z) > MAX_OBSERVATIONS:
        raise ValueError(
            f"{len(z)} observations exceed the {MAX_OBSERVATIONS} cap"
        )
    if sigma2 <= 0.0:
        raise ValueError("sigma2 must be positive")
    if lam < 0.0:
        raise ValueError("lam must be non-negative")
    ell = median_lengthscale(z) if lengthscale is None else float(lengthscale)
    if ell <= 0.0:
        raise ValueError("lengthscale must be positive")
    k = _kernel_matrix(z, sigma2, ell) + lam * np.eye(len(z))
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError as exc:
        raise ValueError("kernel matrix is ill-conditioned; raise lam") from exc
    alpha = cho_solve((chol, True), y)
    return GPModel(z=z.copy(), y=y.copy(), sigma2=float(sigma2),
                   lengthscale=ell, lam=float(lam), chol=chol, alpha=alpha)


def gp_append(model: GPModel, z_new: np.ndarray, y_new: float) -> GPModel:
    """Extend the factorization by one observation in O(n^2).

    Kernel hyperparameters stay frozen, so the result matches a from-scratch
    fit with the same parameters to solver precision.
    """
    if model.n + 1 > MAX_OBSERVATIONS:
        raise ValueError(f"append would exceed the {MAX_OBSERVATIONS} cap")
    q = np.asarray(z_new, dtype=np.float64).ravel()
    if q.size != model.z.shape[1]:
        raise ValueError("new observation dimension mismatch")
    k_vec = _kernel_vector(model, q)
    b = solve_triangular(model.chol, k_vec, lower=True)
    d2 = model.sigma2 + model.lam - float(b @ b)
    if d2 <= 1e-12:
        raise ValueError("kernel matrix is ill-conditioned; raise lam")
    n = model.n
    chol = np.zeros((n + 1, n + 1))
    chol[:n, :n] = model.chol
    chol[n, :n] = b
    chol[n, n] = math.sqrt(d2)
    z = np.vstack([model.z, q[None, :]])
    y = np.append(model.y, float(y_new))
    alpha = cho_solve((chol, True), y)
    return GPModel(z=z, y=y, sigma2=model.sigma2, lengthscale=model.lengthscale,
                   lam=model.lam, chol=chol, alpha=alpha)


def gp_mean(model: GPModel, query: np.ndarray) -> float:
    """Posterior mean k(q, Z)^T (K + lam*I)^{-1} y at one query point."""
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.size != model.z.shape[1]:
        raise ValueError("query dimension mismatch")
    return float(_kernel_vector(model, q) @ model.alpha)


def gp_mean_gradient(model: GPModel, query: np.ndarray) -> np.ndarray:
    """Exact gradient of the posterior mean at the query.

    d/dq of sum_i alpha_i k(q, z_i) with the squared-exponential kernel is
    -(1/ell^2) sum_i alpha_i k(q, z_i) (q - z_i).
    """
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.size != model.z.shape[1]:
        raise ValueError("query dimension mismatch")
    k_vec = _kernel_vector(model, q)
    w = model.alpha * k_vec
    return (-1.0 / model.lengthscale ** 2) * (w.sum() * q - model.z.T @ w)


def pseudo_target(model: GPModel, query: np.ndarray, eta: float,
                  mode: str = "ascent") -> np.ndarray:
    """One guided step of length eta along the surrogate mean's gradient.

    The gradient sets the direction only; eta is a literal step length, so
    the schedule keeps its meaning whatever the scale of the fitted rewards.
    A zero gradient leaves the query untouched. Ascent moves toward higher
    predicted reward (the default); descent is the sign-literal variant
    kept behind this flag.
    """
    if eta < 0.0:
        raise ValueError("eta must be non-negative")
    if mode not in ("ascent", "descent"):
        raise ValueError(f"unknown guidance mode: {mode!r}")
    q = np.asarray(query, dtype=np.float64).ravel()
    g = gp_mean_gradient(model, q)
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        return q
    step = (eta / norm) * g
    return q + step if mode == "ascent" else q - step


def gp_posterior(model: GPModel, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance for a batch of query points.

    Variance is k(q,q) - k(q,Z)^T (K + lam*I)^{-1} k(q,Z), floored at zero.
    """
    qs = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if qs.shape[1] != model.z.shape[1]:
        raise ValueError("query dimension mismatch")
    sq_z = np.sum(model.z ** 2, axis=1)
    sq_q = np.sum(qs ** 2, axis=1)
    d2 = sq_q[:, None] + sq_z[None, :] - 2.0 * (qs @ model.z.T)
    np.maximum(d2, 0.0, out=d2)
    kqz = model.sigma2 * np.exp(-d2 / (2.0 * model.lengthscale ** 2))
    mean = kqz @ model.alpha
    sol = cho_solve((model.chol, True), kqz.T)
    var = model.sigma2 - np.sum(kqz * sol.T, axis=1)
    np.maximum(var, 0.0, out=var)
    return mean, var
