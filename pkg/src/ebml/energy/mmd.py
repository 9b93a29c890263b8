"""Kernel two-sample discrepancy, on arrays and on the tape."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..autodiff import Var, ops


def gaussian_kernel(a, b, sigma: float) -> float:
    """exp(-‖a - b‖² / σ²)."""
    if not sigma > 0:
        raise ValueError("kernel width must be positive")
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.exp(-np.sum(d ** 2) / sigma ** 2))


def sq_dist_matrix(A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    D = np.sum(A ** 2, 1)[:, None] + np.sum(B ** 2, 1)[None, :] - 2 * A @ B.T
    return np.maximum(D, 0.0)


def gaussian_gram(A, B, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError("kernel width must be positive")
    return np.exp(-sq_dist_matrix(A, B) / sigma ** 2)


def median_heuristic(X) -> float:
    """Median pairwise distance between distinct rows (1.0 if all coincide)."""
    D = sq_dist_matrix(X, X)
    iu = np.triu_indices(D.shape[0], 1)
    m = float(np.sqrt(np.median(D[iu]))) if iu[0].size else 0.0
    return m if m > 0 else 1.0


def _terms_from_grams(Kxx, Kyy, Kxy):
    n, m = Kxx.shape[0], Kyy.shape[0]
    a = (Kxx.sum() - np.trace(Kxx)) / (n * (n - 1))
    b = (Kyy.sum() - np.trace(Kyy)) / (m * (m - 1))
    c = 2.0 * Kxy.sum() / (n * m)
    return a, b, c


def mmd2_terms(D, D2, kernel: Callable | None = None, sigma: float | None = None):
    """The three estimator terms (within D, within D′, cross) as a tuple."""
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    D2 = np.atleast_2d(np.asarray(D2, dtype=np.float64))
    if D.shape[0] < 2 or D2.shape[0] < 2:
        raise ValueError("mmd2 needs at least two points in each set")
    if kernel is None:
        s = median_heuristic(np.vstack([D, D2])) if sigma is None else sigma
        return _terms_from_grams(gaussian_gram(D, D, s), gaussian_gram(D2, D2, s),
                                 gaussian_gram(D, D2, s))
    gram = lambda A, B: np.array([[kernel(a, b) for b in B] for a in A])  # noqa: E731
    return _terms_from_grams(gram(D, D), gram(D2, D2), gram(D, D2))


def mmd2(D, D2, kernel: Callable | None = None, sigma: float | None = None) -> float:
    """Unbiased squared MMD; diagonal pairs are excluded from the within-set terms.

    Without ``kernel`` a Gaussian kernel is used, with width ``sigma`` or the
    median heuristic on the pooled points.
    """
    a, b, c = mmd2_terms(D, D2, kernel, sigma)
    return float(a + b - c)


def _gram_var_self(G: Var, sigma: float) -> Var:
    # D_ij = sq_i + sq_j - 2 g_i·g_j, built as A + Aᵀ with A_ij = sq_j - g_i·g_j
    sq = ops.sum(ops.square(G), axis=1)
    A = sq - ops.matmul(G, ops.transpose(G))
    return ops.exp((A + ops.transpose(A)) * (-1.0 / sigma ** 2))


def _gram_var_cross(S: np.ndarray, G: Var, sigma: float) -> Var:
    sq_g = ops.sum(ops.square(G), axis=1)
    sq_s = np.sum(S ** 2, axis=1)[:, None] * np.ones((1, G.shape[0]))
    D = sq_g + (sq_s - ops.matmul(G.tape.const(S), ops.transpose(G)) * 2.0)
    return ops.exp(D * (-1.0 / sigma ** 2))


def mmd2_var(S: np.ndarray, G: Var, sigma: float) -> Var:
    """Unbiased Gaussian-kernel MMD² between constant points S and tape points G."""
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    n, m = S.shape[0], G.shape[0]
    if n < 2 or m < 2:
        raise ValueError("mmd2 needs at least two points in each set")
    Kss = gaussian_gram(S, S, sigma)
    a = (Kss.sum() - np.trace(Kss)) / (n * (n - 1))
    Kgg = _gram_var_self(G, sigma)
    b = (ops.sum(Kgg) - float(m)) * (1.0 / (m * (m - 1)))
    c = ops.sum(_gram_var_cross(S, G, sigma)) * (2.0 / (n * m))
    return b - c + a


def mmd2_permutation_null(D, D2, n_perm: int, rng, sigma: float | None = None) -> np.ndarray:
    """MMD² after randomly reassigning the pooled points to two sets of the original sizes.

    The kernel width is fixed once from the pooled data, so only the split
    varies between replicates.
    """
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    D2 = np.atleast_2d(np.asarray(D2, dtype=np.float64))
    P = np.vstack([D, D2])
    s = median_heuristic(P) if sigma is None else sigma
    K = gaussian_gram(P, P, s)
    n = D.shape[0]
    out = np.empty(n_perm)
    for i in range(n_perm):
        idx = rng.permutation(P.shape[0])
        a, b = idx[:n], idx[n:]
        ta, tb, tc = _terms_from_grams(K[np.ix_(a, a)], K[np.ix_(b, b)], K[np.ix_(a, b)])
        out[i] = ta + tb - tc
    return out


def mmd2_permutation_test(D, D2, n_perm: int, rng, sigma: float | None = None) -> tuple[float, float, np.ndarray]:
    """(observed MMD², permutation p-value, null replicates)."""
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    D2 = np.atleast_2d(np.asarray(D2, dtype=np.float64))
    s = median_heuristic(np.vstack([D, D2])) if sigma is None else sigma
    obs = mmd2(D, D2, sigma=s)
    null = mmd2_permutation_null(D, D2, n_perm, rng, s)
    p = (1 + np.sum(null >= obs)) / (n_perm + 1)
    return obs, float(p), null
