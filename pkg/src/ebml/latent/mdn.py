"""Mixture density networks: an input-conditioned mixture of isotropic Gaussians."""

from __future__ import annotations

import numpy as np

from ..autodiff import ParamStore, Tape, Var, ops
from ..blocks import LinearBlock, mlp

LOG2PI = np.log(2.0 * np.pi)


class MdnModel:
    """Feature net F, then K mean heads and K log-variance heads.

    Component z has mean μ_z(x) ∈ R^d and covariance exp(s_z(x)) I. The
    mixing weights are uniform, 1/K each.
    """

    def __init__(self, n_in: int, n_out: int, K: int, hidden=(16,), name: str = "mdn",
                 activation: str = "tanh"):
        if K < 1:
            raise ValueError("an MDN needs at least one component")
        self.n_in, self.n_out, self.K = n_in, n_out, K
        hidden = list(hidden)
        self.features = mlp(f"{name}.feat", [n_in] + hidden, activation, activation) if hidden else None
        width = hidden[-1] if hidden else n_in
        self.mean_head = LinearBlock(f"{name}.mu", width, K * n_out)
        self.logvar_head = LinearBlock(f"{name}.logvar", width, K)

    def blocks(self):
        return ([self.features] if self.features is not None else []) + [self.mean_head, self.logvar_head]

    def init_params(self, store: ParamStore, rng) -> ParamStore:
        for b in self.blocks():
            b.init_params(store, rng)
        return store

    def heads(self, x: Var, params) -> tuple[Var, Var]:
        """(means of shape (N, K·d), log-variances of shape (N, K)) for a batch."""
        h = self.features(x, params) if self.features is not None else x
        return self.mean_head(h, params), self.logvar_head(h, params)

    def _as_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x[None, :] if x.ndim == 1 else x

    def head_values(self, x, store: ParamStore):
        t = Tape()
        mu, lv = self.heads(t.const(self._as_batch(x)), store.to_vars(t))
        return mu.value.reshape(-1, self.K, self.n_out), lv.value

    def log_density(self, x, y, store: ParamStore) -> np.ndarray:
        """log p(y | x) for aligned rows, or one x against many y."""
        mu, lv = self.head_values(x, store)
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        if mu.shape[0] == 1 and y.shape[0] > 1:
            mu = np.broadcast_to(mu, (y.shape[0],) + mu.shape[1:])
            lv = np.broadcast_to(lv, (y.shape[0], self.K))
        d = self.n_out
        sq = np.sum((y[:, None, :] - mu) ** 2, axis=2)
        a = -0.5 * sq / np.exp(lv) - 0.5 * d * lv - 0.5 * d * LOG2PI - np.log(self.K)
        mx = a.max(axis=1, keepdims=True)
        return (mx + np.log(np.exp(a - mx).sum(axis=1, keepdims=True)))[:, 0]

    def sample(self, x, M: int, rng, store: ParamStore) -> np.ndarray:
        """M draws of y given a single input x, shape (M, d)."""
        return self.sample_batch(np.asarray(x)[None, :], M, rng, store)[0]

    def sample_batch(self, X, M: int, rng, store: ParamStore) -> np.ndarray:
        """M draws per row of X, shape (N, M, d)."""
        mu, lv = self.head_values(X, store)
        N = mu.shape[0]
        z = rng.integers(self.K, size=(N, M))
        rows = np.arange(N)[:, None]
        sd = np.exp(0.5 * lv[rows, z])
        return mu[rows, z] + sd[..., None] * rng.standard_normal((N, M, self.n_out))


def mdn_loss(x, y, model: MdnModel, params) -> Var:
    """Mean over rows of -log Σ_z (1/K) N(y; μ_z(x), exp(s_z(x)) I)."""
    if not isinstance(x, Var):
        raise TypeError("mdn_loss expects tape variables; see mdn_loss_value for arrays")
    mu, lv = model.heads(x, params)
    d = model.n_out
    yv = np.asarray(y.value if isinstance(y, Var) else y, dtype=np.float64)
    comps = []
    for z in range(model.K):
        diff = (y if isinstance(y, Var) else yv) - mu[:, z * d:(z + 1) * d]
        sq = ops.sum(ops.square(diff), axis=1)
        s = lv[:, z]
        comps.append(sq * ops.exp(-s) * (-0.5) - s * (0.5 * d))
    A = ops.stack(comps, axis=1)
    ll = ops.logsumexp(A, axis=1) - (0.5 * d * LOG2PI + np.log(model.K))
    return -ops.mean(ll)


def mdn_loss_value(x, y, model: MdnModel, store: ParamStore) -> float:
    return float(-np.mean(model.log_density(x, y, store)))


def mdn_credible_set(x, model: MdnModel, store: ParamStore, M: int, gamma: float, rng) -> np.ndarray:
    """Samples whose density is at least the empirical (1 - γ) quantile of sample densities.

    The retained set holds roughly the densest fraction γ of the draws, so
    γ = 1 keeps every sample.
    """
    if M < 10:
        raise ValueError("credible set needs at least 10 samples")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    Y = model.sample(x, M, rng, store)
    if gamma == 1.0:
        return Y
    logp = model.log_density(x, Y, store)
    thr = np.quantile(logp, 1.0 - gamma)
    return Y[logp >= thr]
