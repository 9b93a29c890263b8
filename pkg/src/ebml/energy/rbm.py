"""Binary restricted Boltzmann machines with exact enumeration for small sizes.

Energy e(x, z) = -xᵀWz - xᵀb - zᵀc with x ∈ {0,1}^|x| and z ∈ {0,1}^|z|.
Free energy F(x) = -log Σ_z exp(-e(x, z)).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..autodiff.ops import stable_sigmoid


@dataclass
class RbmParams:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        if self.W.ndim != 2 or min(self.W.shape) < 1:
            raise ValueError("W must be a nonempty |x|×|z| matrix")
        if self.b.shape != (self.W.shape[0],) or self.c.shape != (self.W.shape[1],):
            raise ValueError("bias shapes do not match W")
        for k in ("W", "b", "c"):
            if not np.all(np.isfinite(getattr(self, k))):
                raise ValueError(f"RBM parameter {k} is not finite")

    @property
    def n_visible(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmParams":
        return cls(np.zeros((n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))

    @classmethod
    def random(cls, n_visible: int, n_hidden: int, rng, scale: float = 0.1) -> "RbmParams":
        return cls(rng.normal(0, scale, (n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))

    def copy(self) -> "RbmParams":
        return RbmParams(self.W.copy(), self.b.copy(), self.c.copy())

    def as_dict(self) -> dict:
        return {"W": self.W, "b": self.b, "c": self.c}


def _binary(x, n, what):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != n:
        raise ValueError(f"{what} has width {x.shape[-1]}, expected {n}")
    if not np.all((x == 0) | (x == 1)):
        raise ValueError(f"{what} must be binary")
    return x


def rbm_energy(x, z, theta: RbmParams):
    x = _binary(x, theta.n_visible, "visible state")
    z = _binary(z, theta.n_hidden, "hidden state")
    e = -np.einsum("...i,ij,...j->...", x, theta.W, z) - x @ theta.b - z @ theta.c
    return float(e) if np.ndim(e) == 0 else e


def rbm_unnorm_logp(x, theta: RbmParams):
    """xᵀb + Σ_j softplus(w_·jᵀx + c_j), the negative free energy."""
    x = _binary(x, theta.n_visible, "visible state")
    a = x @ theta.W + theta.c
    v = x @ theta.b + np.sum(np.logaddexp(0.0, a), axis=-1)
    return float(v) if np.ndim(v) == 0 else v


def rbm_free_energy(x, theta: RbmParams):
    return -rbm_unnorm_logp(x, theta)


def rbm_cond_hidden(x, theta: RbmParams) -> np.ndarray:
    x = _binary(x, theta.n_visible, "visible state")
    return stable_sigmoid(x @ theta.W + theta.c)


def rbm_cond_visible(z, theta: RbmParams) -> np.ndarray:
    z = _binary(z, theta.n_hidden, "hidden state")
    return stable_sigmoid(z @ theta.W.T + theta.b)


def free_energy_grad(x, theta: RbmParams) -> dict[str, np.ndarray]:
    """∇θ F(x), averaged over rows when x is a batch."""
    x = np.atleast_2d(_binary(x, theta.n_visible, "visible state"))
    h = stable_sigmoid(x @ theta.W + theta.c)
    n = x.shape[0]
    return {"W": -(x.T @ h) / n, "b": -x.mean(axis=0), "c": -h.mean(axis=0)}


# exact enumeration -------------------------------------------------------------

def enumerate_states(n: int) -> np.ndarray:
    """All 2^n binary vectors, in lexicographic order."""
    if n > 20:
        raise ValueError("too many states to enumerate")
    return np.array(list(itertools.product((0.0, 1.0), repeat=n))).reshape(-1, n)


def rbm_log_partition(theta: RbmParams) -> float:
    lp = rbm_unnorm_logp(enumerate_states(theta.n_visible), theta)
    m = lp.max()
    return float(m + np.log(np.exp(lp - m).sum()))


def rbm_visible_probs(theta: RbmParams) -> np.ndarray:
    """Exact p(x) over ``enumerate_states(|x|)``."""
    lp = rbm_unnorm_logp(enumerate_states(theta.n_visible), theta)
    p = np.exp(lp - lp.max())
    return p / p.sum()


def rbm_log_likelihood(X, theta: RbmParams) -> float:
    """Mean exact log p(x) over the rows of X."""
    return float(np.mean(rbm_unnorm_logp(X, theta)) - rbm_log_partition(theta))


def state_index(x) -> np.ndarray:
    """Row index of binary vectors in ``enumerate_states`` order."""
    x = np.atleast_2d(np.asarray(x)).astype(int)
    return x @ (1 << np.arange(x.shape[1])[::-1])


# sampling and training --------------------------------------------------------

def gibbs_sweep(x, theta: RbmParams, k: int, rng) -> np.ndarray:
    """k rounds of z ~ p(z|x) then x ~ p(x|z). Rows of a batch are independent chains."""
    if k < 1:
        raise ValueError("gibbs_sweep needs k >= 1")
    x = _binary(x, theta.n_visible, "visible state").copy()
    for _ in range(k):
        ph = stable_sigmoid(x @ theta.W + theta.c)
        z = (rng.random(ph.shape) < ph).astype(np.float64)
        pv = stable_sigmoid(z @ theta.W.T + theta.b)
        x = (rng.random(pv.shape) < pv).astype(np.float64)
    return x


def _sub(a: dict, b: dict) -> dict:
    return {k: a[k] - b[k] for k in a}


def cd_k_gradient(x, theta: RbmParams, k: int, rng, return_samples: bool = False):
    """∇F(data) - ∇F(x′) with x′ from k Gibbs rounds started at the data.

    This estimates the gradient of the negative log-likelihood.
    """
    xp = gibbs_sweep(x, theta, k, rng)
    g = _sub(free_energy_grad(x, theta), free_energy_grad(xp, theta))
    return (g, xp) if return_samples else g


@dataclass
class PcdBuffer:
    particles: np.ndarray
    steps: int = 1
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=np.float64))
        if self.steps < 0:
            raise ValueError("steps per update must be non-negative")

    @classmethod
    def init(cls, n_visible: int, rng, n_particles: int = 25, steps: int = 1) -> "PcdBuffer":
        return cls((rng.random((n_particles, n_visible)) < 0.5).astype(np.float64), steps)


def pcd_update(buffer: PcdBuffer, theta: RbmParams, rng) -> tuple[dict, PcdBuffer]:
    """Advance every particle ``buffer.steps`` Gibbs rounds; return the negative-phase term."""
    if buffer.particles.shape[1] != theta.n_visible:
        raise ValueError("particle width does not match the visible layer")
    parts = buffer.particles if buffer.steps == 0 else gibbs_sweep(buffer.particles, theta, buffer.steps, rng)
    return free_energy_grad(parts, theta), PcdBuffer(parts.copy(), buffer.steps)


def rbm_train(X, theta: RbmParams, rng, steps: int = 500, lr: float = 0.1, method: str = "cd",
              k: int = 1, buffer: PcdBuffer | None = None, track_loglik: bool = False):
    """Plain gradient descent with CD-k or PCD gradients. Returns (θ, history)."""
    theta = theta.copy()
    hist = []
    if method == "pcd" and buffer is None:
        buffer = PcdBuffer.init(theta.n_visible, rng)
    for _ in range(steps):
        if method == "cd":
            g = cd_k_gradient(X, theta, k, rng)
        elif method == "pcd":
            neg, buffer = pcd_update(buffer, theta, rng)
            g = _sub(free_energy_grad(X, theta), neg)
        else:
            raise ValueError(f"unknown RBM training method {method!r}")
        theta = RbmParams(theta.W - lr * g["W"], theta.b - lr * g["b"], theta.c - lr * g["c"])
        if track_loglik:
            hist.append(rbm_log_likelihood(X, theta))
    return theta, hist
