"""Closed-form divergences and entropies."""

from __future__ import annotations

import numpy as np


def kl_gaussian_diag(mu, var, prior_var=1.0, prior_mean=0.0) -> float:
    """KL(N(mu, diag var) || N(prior_mean, prior_var I))."""
    mu = np.asarray(mu, dtype=np.float64)
    var = np.broadcast_to(np.asarray(var, dtype=np.float64), mu.shape)
    pv = np.broadcast_to(np.asarray(prior_var, dtype=np.float64), mu.shape)
    if np.any(var <= 0) or np.any(pv <= 0):
        raise ValueError("variances must be positive")
    dm = mu - prior_mean
    return float(0.5 * np.sum(var / pv + dm ** 2 / pv - 1.0 + np.log(pv) - np.log(var)))


def entropy_categorical(p) -> float:
    """-Σ p log p with 0·log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("entropy_categorical: p must be a probability vector")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def xlogx(p: np.ndarray) -> np.ndarray:
    """Elementwise p log p, zero where p is zero."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log(p[nz])
    return out
