"""Amortised variational inference with a Gaussian encoder and decoder."""

from __future__ import annotations

import numpy as np

from ..autodiff import ParamStore, Tape, Var, ops
from ..blocks import Block

LOG2PI = np.log(2.0 * np.pi)


class VaeModel:
    """Encoder G gives the mean of q(z | x); decoder F maps z back to x.

    ``sigma2_prior`` is the variance of p(z) = N(0, σ² I). ``noise_scale``
    is the standard deviation of the reparametrised posterior sample
    z = G(x) + s·ε and defaults to sqrt(sigma2_prior). Setting
    ``sigma2_prior`` to inf removes the prior penalty.
    """

    def __init__(self, encoder: Block, decoder: Block, latent_dim: int,
                 sigma2_prior: float = 1.0, noise_scale: float | None = None):
        if not sigma2_prior > 0:
            raise ValueError("prior variance must be positive")
        self.encoder, self.decoder = encoder, decoder
        self.latent_dim = int(latent_dim)
        self.sigma2_prior = float(sigma2_prior)
        if noise_scale is None:
            noise_scale = float(np.sqrt(sigma2_prior)) if np.isfinite(sigma2_prior) else 1.0
        if noise_scale < 0:
            raise ValueError("noise scale must be non-negative")
        self.noise_scale = float(noise_scale)
        for blk, attr in ((encoder, "n_out"), (decoder, "n_in")):
            width = getattr(blk, attr, None)
            if width is not None and width != self.latent_dim:
                raise ValueError(f"latent width {self.latent_dim} does not match block '{blk.name}'")

    def init_params(self, store: ParamStore, rng) -> ParamStore:
        self.encoder.init_params(store, rng)
        self.decoder.init_params(store, rng)
        return store

    def encode(self, x, store: ParamStore) -> np.ndarray:
        t = Tape()
        return self.encoder(t.const(np.asarray(x, dtype=np.float64)), store.to_vars(t)).value

    def decode(self, z, store: ParamStore) -> np.ndarray:
        t = Tape()
        return self.decoder(t.const(np.asarray(z, dtype=np.float64)), store.to_vars(t)).value


def vae_loss_var(x: Var, model: VaeModel, params: dict, eps) -> Var:
    """½‖x - F(G(x) + s ε)‖² + ‖G(x)‖² / (2σ²), averaged over rows for a batch."""
    mu = model.encoder(x, params)
    z = mu if model.noise_scale == 0 else mu + np.asarray(eps) * model.noise_scale
    r = x - model.decoder(z, params)
    if x.ndim == 1:
        loss = ops.sum(ops.square(r)) * 0.5
        if np.isfinite(model.sigma2_prior):
            loss = loss + ops.sum(ops.square(mu)) * (0.5 / model.sigma2_prior)
        return loss
    loss = ops.sum(ops.square(r)) * (0.5 / x.shape[0])
    if np.isfinite(model.sigma2_prior):
        loss = loss + ops.sum(ops.square(mu)) * (0.5 / (model.sigma2_prior * x.shape[0]))
    return loss


def vae_loss(x, model: VaeModel, store: ParamStore, rng=None, eps=None) -> tuple[Var, Tape]:
    """Loss on a fresh tape whose parameter leaves come from ``store``.

    ``eps`` overrides the standard-normal draw from ``rng``.
    """
    x = np.asarray(x, dtype=np.float64)
    zshape = (model.latent_dim,) if x.ndim == 1 else (x.shape[0], model.latent_dim)
    if eps is None:
        if rng is None:
            raise ValueError("vae_loss needs rng or an explicit eps")
        eps = rng.standard_normal(zshape)
    tape = Tape()
    pvars = store.to_vars(tape)
    tape.params = pvars
    out = vae_loss_var(tape.const(x), model, pvars, eps)
    return out, tape


# linear-Gaussian closed forms -------------------------------------------------

def linear_gaussian_log_marginal(x, W, b, sigma2: float) -> float:
    """log N(x; b, I + σ² W Wᵀ)."""
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    d = W.shape[0]
    C = np.eye(d) + sigma2 * W @ W.T
    L = np.linalg.cholesky(C)
    r = np.linalg.solve(L, x - b)
    return float(-0.5 * r @ r - np.sum(np.log(np.diag(L))) - 0.5 * d * LOG2PI)


def linear_gaussian_posterior(x, W, b, sigma2: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact p(z | x): covariance (WᵀW + σ⁻² I)⁻¹, mean cov·Wᵀ(x - b)."""
    W = np.asarray(W, dtype=np.float64)
    cov = np.linalg.inv(W.T @ W + np.eye(W.shape[1]) / sigma2)
    cov = 0.5 * (cov + cov.T)
    return cov @ W.T @ (np.asarray(x, dtype=np.float64) - b), cov


def linear_gaussian_elbo(x, W, b, sigma2: float, q_mean, q_cov) -> float:
    """E_q[log p(x | z) + log p(z) - log q(z)] for q = N(q_mean, q_cov)."""
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    m = np.asarray(q_mean, dtype=np.float64)
    C = np.atleast_2d(np.asarray(q_cov, dtype=np.float64))
    if C.shape == (1, 1) and m.shape[0] > 1:
        C = C[0, 0] * np.eye(m.shape[0])
    d, K = W.shape
    r = x - W @ m - b
    lik = -0.5 * d * LOG2PI - 0.5 * (r @ r + np.trace(W @ C @ W.T))
    prior = -0.5 * K * np.log(2 * np.pi * sigma2) - 0.5 * (m @ m + np.trace(C)) / sigma2
    ent = 0.5 * K * np.log(2 * np.pi * np.e) + 0.5 * np.linalg.slogdet(C)[1]
    return float(lik + prior + ent)
