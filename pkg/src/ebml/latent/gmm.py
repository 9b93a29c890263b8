"""Spherical unit-variance Gaussian mixtures fit by (tempered) EM, and K-means."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .divergence import xlogx

LOG2PI = np.log(2.0 * np.pi)


@dataclass
class GmmState:
    means: np.ndarray
    responsibilities: np.ndarray
    beta: float = 1.0
    elbo_history: list = field(default_factory=list)

    def __post_init__(self):
        R = self.responsibilities
        if np.any(R < 0) or not np.allclose(R.sum(axis=1), 1.0, atol=1e-10):
            raise ValueError("responsibility rows must be nonnegative and sum to 1")
        if self.beta < 0:
            raise ValueError("temperature must be non-negative")


def sq_dists(X, means) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    d = X[:, None, :] - means[None, :, :]
    return np.einsum("nmd,nmd->nm", d, d)


def gmm_e_step(X, means, beta: float = 1.0) -> np.ndarray:
    """α_k^n ∝ exp(-‖xⁿ - μ_k‖² / (2β)).

    β = 1 is the exact posterior of the unit-variance mixture; β = 0 gives
    hard assignment to the nearest mean (lowest index on ties).
    """
    if beta < 0:
        raise ValueError("temperature must be non-negative")
    D = sq_dists(X, means)
    if beta == 0:
        R = np.zeros_like(D)
        R[np.arange(D.shape[0]), np.argmin(D, axis=1)] = 1.0
        return R
    a = -D / (2.0 * beta)
    a -= a.max(axis=1, keepdims=True)
    R = np.exp(a)
    return R / R.sum(axis=1, keepdims=True)


def gmm_m_step(X, responsibilities, rng=None) -> np.ndarray:
    """Responsibility-weighted means.

    A component with zero total responsibility is re-seeded at a uniformly
    chosen data point, which needs ``rng``.
    """
    X = np.asarray(X, dtype=np.float64)
    R = np.asarray(responsibilities, dtype=np.float64)
    tot = R.sum(axis=0)
    empty = tot <= 0
    means = (R.T @ X) / np.where(empty, 1.0, tot)[:, None]
    if np.any(empty):
        if rng is None:
            raise ValueError("empty component and no rng to re-seed it")
        for k in np.flatnonzero(empty):
            means[k] = X[rng.integers(X.shape[0])]
    return means


def gmm_log_density(X, means) -> np.ndarray:
    """log p(xⁿ) under the uniform mixture of N(μ_k, I)."""
    X = np.asarray(X, dtype=np.float64)
    M = len(means)
    d = X.shape[1]
    a = -0.5 * sq_dists(X, means) - 0.5 * d * LOG2PI - np.log(M)
    mx = a.max(axis=1, keepdims=True)
    return (mx + np.log(np.exp(a - mx).sum(axis=1, keepdims=True)))[:, 0]


def gmm_elbo(X, means, responsibilities) -> float:
    """Average over data of Σ_k α_k (log p(x, z=k) - log α_k)."""
    X = np.asarray(X, dtype=np.float64)
    R = np.asarray(responsibilities, dtype=np.float64)
    M = R.shape[1]
    d = X.shape[1]
    logjoint = -0.5 * sq_dists(X, means) - 0.5 * d * LOG2PI - np.log(M)
    return float(np.mean(np.sum(R * logjoint, axis=1) - np.sum(xlogx(R), axis=1)))


def _init_means(X, M, rng):
    if M > X.shape[0]:
        raise ValueError(f"cannot place {M} components on {X.shape[0]} points")
    return X[rng.choice(X.shape[0], size=M, replace=False)].copy()


def gmm_fit(X, M: int, rng, n_iter: int = 100, beta: float = 1.0, init_means=None,
            tol: float = 0.0) -> GmmState:
    """Alternate E and M steps, recording the objective after each full iteration."""
    X = np.asarray(X, dtype=np.float64)
    means = _init_means(X, M, rng) if init_means is None else np.array(init_means, dtype=np.float64)
    hist = []
    R = gmm_e_step(X, means, beta)
    for _ in range(n_iter):
        means = gmm_m_step(X, R, rng)
        R = gmm_e_step(X, means, beta)
        hist.append(gmm_elbo(X, means, R))
        if tol > 0 and len(hist) > 1 and abs(hist[-1] - hist[-2]) < tol:
            break
    return GmmState(means, R, beta, hist)


def gmm_minibatch_step(X_batch, means, lr: float, beta: float = 1.0) -> np.ndarray:
    """Exact E-step on the batch, then one gradient-ascent step on its objective."""
    X_batch = np.asarray(X_batch, dtype=np.float64)
    R = gmm_e_step(X_batch, means, beta)
    grad = (R.T @ X_batch - R.sum(axis=0)[:, None] * means) / X_batch.shape[0]
    return means + lr * grad


@dataclass
class KMeansResult:
    means: np.ndarray
    assignments: np.ndarray
    wcss_history: list
    n_iter: int

    def __iter__(self):
        return iter((self.means, self.assignments))


def wcss(X, means, assignments) -> float:
    X = np.asarray(X, dtype=np.float64)
    return float(np.sum((X - np.asarray(means)[assignments]) ** 2))


def kmeans_fit(X, K: int, rng, max_iters: int = 100, init_means=None) -> KMeansResult:
    """Hard EM: nearest-mean assignment, then per-cluster means.

    Unpacks as ``(means, assignments)``.
    """
    X = np.asarray(X, dtype=np.float64)
    if K > X.shape[0]:
        raise ValueError(f"K={K} exceeds the number of points {X.shape[0]}")
    if K < 1:
        raise ValueError("K must be at least 1")
    means = _init_means(X, K, rng) if init_means is None else np.array(init_means, dtype=np.float64)
    R = gmm_e_step(X, means, 0.0)
    assign = R.argmax(axis=1)
    hist = [wcss(X, means, assign)]
    it = 0
    for it in range(1, max_iters + 1):
        means = gmm_m_step(X, R, rng)
        R = gmm_e_step(X, means, 0.0)
        new = R.argmax(axis=1)
        hist.append(wcss(X, means, new))
        done = np.array_equal(new, assign)
        assign = new
        if done:
            break
    return KMeansResult(means, assign, hist, it)


def kmeans_best_of(X, K: int, rng, restarts: int = 10, max_iters: int = 100) -> KMeansResult:
    """Lowest final within-cluster sum of squares over several random starts."""
    best = None
    for _ in range(restarts):
        r = kmeans_fit(X, K, rng, max_iters)
        if best is None or r.wcss_history[-1] < best.wcss_history[-1]:
            best = r
    return best
