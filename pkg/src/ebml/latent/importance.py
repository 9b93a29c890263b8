"""Importance-sampled estimates of log p(x) for latent-variable models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG2PI = np.log(2.0 * np.pi)


@dataclass
class ISResult:
    estimate: float
    stderr: float
    log_weights: np.ndarray

    def __float__(self):
        return self.estimate


def _proposal_factor(var, K):
    v = np.asarray(var, dtype=np.float64)
    if v.ndim == 0:
        v = np.full(K, float(v))
    if v.ndim == 1:
        if np.any(v <= 0):
            raise ValueError("proposal variances must be positive")
        return np.diag(np.sqrt(v))
    return np.linalg.cholesky(v)


def log_mean_exp(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    mx = a.max()
    return float(mx + np.log(np.mean(np.exp(a - mx))))


def is_log_marginal(x, decoder, prior_var: float, proposal, M: int, rng,
                    obs_var: float = 1.0) -> ISResult:
    """log (1/M) Σ_m p(x | z_m) p(z_m) / q(z_m) with z_m ~ q.

    ``decoder`` maps an (M, K) array of latents to (M, d) means of a
    Gaussian likelihood with variance ``obs_var``. ``proposal`` is
    (mean, var) where var is a scalar, a diagonal vector or a full
    covariance. The standard error is a delta-method estimate for the log.
    """
    if M < 1:
        raise ValueError("need at least one sample")
    x = np.asarray(x, dtype=np.float64)
    qm, qv = proposal
    qm = np.asarray(qm, dtype=np.float64)
    K = qm.shape[0]
    L = _proposal_factor(qv, K)
    eps = rng.standard_normal((M, K))
    Z = qm + eps @ L.T
    logdetL = np.sum(np.log(np.diag(L)))
    log_q = -0.5 * np.sum(eps ** 2, axis=1) - logdetL - 0.5 * K * LOG2PI
    log_prior = -0.5 * np.sum(Z ** 2, axis=1) / prior_var - 0.5 * K * np.log(2 * np.pi * prior_var)
    mean = np.asarray(decoder(Z), dtype=np.float64).reshape(M, -1)
    d = x.shape[0]
    log_lik = (-0.5 * np.sum((x - mean) ** 2, axis=1) / obs_var
               - 0.5 * d * np.log(2 * np.pi * obs_var))
    lw = log_lik + log_prior - log_q
    est = log_mean_exp(lw)
    w = np.exp(lw - lw.max())
    se = float(np.std(w, ddof=1) / (np.sqrt(M) * w.mean())) if M > 1 else float("nan")
    return ISResult(est, se, lw)
