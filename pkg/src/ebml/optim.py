"""First-order optimisers working in place on a ParamStore, plus conditioning tools."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ParamStore


def clip_global_norm(store: ParamStore, max_norm: float | None) -> float:
    """Rescale all gradients so their joint L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    total = float(np.sqrt(sum(float(np.sum(store.grad(n) ** 2)) for n in store.names())))
    if max_norm is not None and total > max_norm > 0:
        scale = max_norm / total
        for n in store.names():
            store.entry(n).grad = store.grad(n) * scale
    return total


def sgd_step(store: ParamStore, alpha: float) -> ParamStore:
    for n in store.names():
        e = store.entry(n)
        e.value = e.value - alpha * e.grad
    return store


def lipschitz_step_size(L: float) -> float:
    """1/L maximises α - (L/2)α², the guaranteed decrease for an L-smooth loss."""
    if not L > 0:
        raise ValueError(f"Lipschitz constant must be positive, got {L}")
    return 1.0 / L


def adagrad_step(store: ParamStore, alpha: float, eps: float = 1e-8) -> ParamStore:
    for n in store.names():
        e = store.entry(n)
        acc = e.slots.get("adagrad_acc")
        if acc is None:
            acc = np.zeros_like(e.value)
        acc = acc + e.grad ** 2
        e.slots["adagrad_acc"] = acc
        e.value = e.value - alpha * e.grad / np.sqrt(acc + eps)
    return store


def adam_step(store: ParamStore, alpha: float = 1e-3, beta_m: float = 0.9,
              beta_v: float = 0.999, eps: float = 1e-8) -> ParamStore:
    """Exponentially smoothed first and second moments, without bias correction."""
    for n in store.names():
        e = store.entry(n)
        m = e.slots.get("adam_m", np.zeros_like(e.value))
        v = e.slots.get("adam_v", np.zeros_like(e.value))
        m = beta_m * m + (1.0 - beta_m) * e.grad
        v = beta_v * v + (1.0 - beta_v) * e.grad ** 2
        e.slots["adam_m"], e.slots["adam_v"] = m, v
        e.value = e.value - alpha * m / np.sqrt(v + eps)
    return store


@dataclass
class Optimizer:
    """Configured optimiser; ``step`` applies one update using stored gradients."""

    kind: str = "adam"
    alpha: float = 1e-3
    beta_m: float = 0.9
    beta_v: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None

    def __post_init__(self):
        if self.kind not in ("sgd", "adagrad", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError("step size must be positive")
        if not (0 <= self.beta_m <= 1 and 0 <= self.beta_v <= 1):
            raise ValueError("smoothing coefficients must lie in [0, 1]")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def step(self, store: ParamStore) -> ParamStore:
        if self.clip_norm is not None:
            clip_global_norm(store, self.clip_norm)
        if self.kind == "sgd":
            return sgd_step(store, self.alpha)
        if self.kind == "adagrad":
            return adagrad_step(store, self.alpha, self.eps)
        return adam_step(store, self.alpha, self.beta_m, self.beta_v, self.eps)

    @classmethod
    def from_config(cls, cfg: dict | None) -> "Optimizer":
        cfg = dict(cfg or {})
        return cls(kind=cfg.get("kind", "adam"), alpha=float(cfg.get("alpha", 1e-3)),
                   beta_m=float(cfg.get("beta_m", 0.9)), beta_v=float(cfg.get("beta_v", 0.999)),
                   eps=float(cfg.get("eps", 1e-8)), clip_norm=cfg.get("clip_norm"))


# conditioning ---------------------------------------------------------------

def jacobi_eigenvalues(H, tol: float = 1e-14, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(H, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix is not symmetric")
    n = A.shape[0]
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum((A - np.diag(np.diag(A))) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                if theta == 0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))


def condition_number(H) -> float:
    """|λ_max| / |λ_min| of a symmetric matrix."""
    lam = jacobi_eigenvalues(H)
    a = np.abs(lam)
    if a.min() <= 1e-14 * max(a.max(), 1.0):
        raise np.linalg.LinAlgError("matrix is singular; condition number is unbounded")
    return float(a.max() / a.min())


def least_squares_hessian(X) -> np.ndarray:
    """Hessian of the mean squared error of a linear model with bias.

    [[ (1/N) Σ x xᵀ, mean x ], [ mean xᵀ, 1 ]]
    """
    X = np.asarray(X, dtype=np.float64)
    N, d = X.shape
    H = np.empty((d + 1, d + 1))
    H[:d, :d] = X.T @ X / N
    H[:d, d] = H[d, :d] = X.mean(axis=0)
    H[d, d] = 1.0
    return H
