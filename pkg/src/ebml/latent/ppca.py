"""Linear-Gaussian latent model x = W z + b + noise, fit by variational EM.

Model: z ~ N(0, σ² I_K), x | z ~ N(W z + b, I_d). The approximate posterior
is q(z | xⁿ) = N(μ_n, I). Setting σ² = inf removes the prior, and EM then
recovers the principal subspace of the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG2PI = np.log(2.0 * np.pi)


@dataclass
class PpcaState:
    W: np.ndarray
    b: np.ndarray
    sigma2_prior: float
    posterior_means: np.ndarray
    elbo_history: list = field(default_factory=list)

    def __post_init__(self):
        if not (self.sigma2_prior > 0):
            raise ValueError("prior variance must be positive or inf")

    @property
    def infinite_prior(self) -> bool:
        return bool(np.isinf(self.sigma2_prior))


def ppca_e_step(X, W, b, sigma2: float) -> np.ndarray:
    """Posterior means μ_n = (WᵀW + σ⁻² I)⁻¹ Wᵀ (xⁿ - b), one row per example.

    With σ² = inf the pseudoinverse of W is used.
    """
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    D = X - np.asarray(b, dtype=np.float64)
    if np.isinf(sigma2):
        return D @ np.linalg.pinv(W).T
    if not sigma2 > 0:
        raise ValueError("prior variance must be positive")
    A = W.T @ W + np.eye(W.shape[1]) / sigma2
    if np.linalg.cond(A) > 1e14:
        raise np.linalg.LinAlgError("ppca_e_step: normal matrix is singular")
    return np.linalg.solve(A, W.T @ D.T).T


def ppca_m_step(X, mu, b, ridge: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Loadings from the current bias, then the bias as the mean residual.

    W = ((1/N) Σ (xⁿ - b) μ_nᵀ)(I + (1/N) Σ μ_n μ_nᵀ)⁻¹ and
    b = (1/N) Σ (xⁿ - W μ_n).
    """
    X = np.asarray(X, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    N = X.shape[0]
    if N < 2:
        raise ValueError("ppca_m_step needs at least two examples")
    K = mu.shape[1]
    A = (X - b).T @ mu / N
    B = np.eye(K) + mu.T @ mu / N
    try:
        if np.linalg.cond(B) > 1e14:
            raise np.linalg.LinAlgError
        W = np.linalg.solve(B.T, A.T).T
    except np.linalg.LinAlgError:
        W = np.linalg.solve((B + ridge * np.eye(K)).T, A.T).T
    b_new = np.mean(X - mu @ W.T, axis=0)
    return W, b_new


def ppca_elbo(X, W, b, mu, sigma2: float) -> float:
    """Average variational objective with q = N(μ_n, I).

    The prior terms are dropped when σ² = inf.
    """
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    d, K = W.shape
    R = X - mu @ W.T - b
    rec = -0.5 * np.sum(R ** 2, axis=1) - 0.5 * np.trace(W.T @ W) - 0.5 * d * LOG2PI
    if np.isinf(sigma2):
        return float(rec.mean())
    kl = 0.5 * ((K + np.sum(mu ** 2, axis=1)) / sigma2 - K + K * np.log(sigma2))
    return float((rec - kl).mean())


def ppca_fit(X, K: int, rng, sigma2: float = np.inf, n_iter: int = 200, W0=None,
             b0=None) -> PpcaState:
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    W = rng.normal(size=(d, K)) if W0 is None else np.array(W0, dtype=np.float64)
    b = X.mean(axis=0) if b0 is None else np.array(b0, dtype=np.float64)
    hist = []
    mu = ppca_e_step(X, W, b, sigma2)
    for _ in range(n_iter):
        W, b = ppca_m_step(X, mu, b)
        mu = ppca_e_step(X, W, b, sigma2)
        hist.append(ppca_elbo(X, W, b, mu, sigma2))
    return PpcaState(W, b, sigma2, mu, hist)


def ppca_minibatch_step(X_batch, W, b, sigma2: float, lr: float):
    """Exact E-step on the batch, then a gradient-ascent step on its objective."""
    X_batch = np.asarray(X_batch, dtype=np.float64)
    mu = ppca_e_step(X_batch, W, b, sigma2)
    N = X_batch.shape[0]
    R = X_batch - mu @ W.T - b
    gW = R.T @ mu / N - W
    gb = R.mean(axis=0)
    return W + lr * gW, b + lr * gb


def principal_angles(A, B) -> np.ndarray:
    """Principal angles (radians) between the column spaces of A and B."""
    Qa, _ = np.linalg.qr(np.asarray(A, dtype=np.float64))
    Qb, _ = np.linalg.qr(np.asarray(B, dtype=np.float64))
    s = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))
