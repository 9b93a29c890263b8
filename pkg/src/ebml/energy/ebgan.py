"""Energy-based adversarial training with an entropy surrogate for the sampler.

The energy player lowers energy on data and raises it on generated points.
The sampler lowers the energy of its samples, plus λ·MMD² towards a
Gaussian inflated around its own batch. The MMD pull toward a wider cloud
stands in for an entropy bonus.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import ParamStore, Tape, Var, ops
from ..blocks import Block, LinearBlock, Sequential, mlp
from .mmd import median_heuristic, mmd2_var


class AutoencoderEnergy(Block):
    """e(x) = ‖x - D(E(x))‖² per row: well-reconstructed points have low energy."""

    def __init__(self, name: str, dim: int, hidden: int = 8, code: int = 1):
        super().__init__(name)
        self.net = Sequential(name, [LinearBlock(f"{name}.enc0", dim, hidden, "tanh"),
                                     LinearBlock(f"{name}.enc1", hidden, code, "tanh"),
                                     LinearBlock(f"{name}.dec0", code, hidden, "tanh"),
                                     LinearBlock(f"{name}.dec1", hidden, dim)])

    def init_params(self, store, rng):
        return self.net.init_params(store, rng)

    def param_names(self):
        return self.net.param_names()

    def __call__(self, x, params):
        return ops.sum(ops.square(x - self.net(x, params)), axis=1)


class MlpEnergy(Block):
    """Scalar energy per row from a small network."""

    def __init__(self, name: str, dim: int, hidden: int = 16):
        super().__init__(name)
        self.net = mlp(name, [dim, hidden, 1], "tanh")

    def init_params(self, store, rng):
        return self.net.init_params(store, rng)

    def param_names(self):
        return self.net.param_names()

    def __call__(self, x, params):
        return ops.reshape(self.net(x, params), (x.shape[0],))


def inflated_gaussian(G: np.ndarray, alpha: float, n: int, rng, ridge: float = 1e-8) -> np.ndarray:
    """Draws from N(mean(G), α·cov(G)), with a ridge if the covariance is degenerate."""
    G = np.atleast_2d(G)
    mu = G.mean(axis=0)
    C = np.atleast_2d(np.cov(G.T)) if G.shape[0] > 1 else np.zeros((G.shape[1],) * 2)
    C = alpha * C
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        L = np.linalg.cholesky(C + ridge * np.eye(C.shape[0]))
    if np.min(np.diag(L)) < np.sqrt(ridge):
        L = np.linalg.cholesky(C + ridge * np.eye(C.shape[0]))
    return mu + rng.standard_normal((n, G.shape[1])) @ L.T


def ebgan_losses(batch, generator: Block, energy: Block, params: dict, lam: float, alpha: float,
                 M: int, rng, latent_dim: int, sigma: float | None = None,
                 margin: float | None = None) -> tuple[Var, Var]:
    """(energy-player loss, sampler-player loss) on the tape that holds ``params``.

    energy loss = mean e(data) - mean e(g(ε)); with ``margin`` the second
    term becomes mean max(0, margin - e(g(ε))), which keeps the energy
    bounded below. sampler loss = mean e(g(ε)) + λ·MMD²(s, g(ε)) where s are
    constant draws from the inflated Gaussian.
    """
    if not alpha > 1:
        raise ValueError("inflation factor must exceed 1")
    if lam < 0:
        raise ValueError("entropy weight must be non-negative")
    tape = next(iter(params.values())).tape
    X = tape.const(np.asarray(batch, dtype=np.float64))
    eps = rng.standard_normal((M, latent_dim))
    G = generator(tape.const(eps), params)
    e_data = ops.mean(energy(X, params))
    e_fake = energy(G, params)
    if margin is None:
        e_loss = e_data - ops.mean(e_fake)
    else:
        # the energy player sees generated points as constants
        e_fake_c = energy(tape.const(G.value), params)
        e_loss = e_data + ops.mean(ops.maximum_const(e_fake_c * -1.0 + margin, 0.0))
    g_loss = ops.mean(e_fake)
    if lam > 0:
        S = inflated_gaussian(G.value, alpha, M, rng)
        s = median_heuristic(np.vstack([S, G.value])) if sigma is None else sigma
        g_loss = g_loss + mmd2_var(S, G, s) * lam
    return e_loss, g_loss


def ebgan_train(data, generator: Block, energy: Block, store: ParamStore, rng, latent_dim: int,
                steps: int = 500, batch_size: int = 64, lam: float = 1.0, alpha: float = 2.0,
                lr: float = 1e-2, margin: float | None = 1.0, energy_steps: int = 1):
    """Alternating Adam updates for both players. Returns a list of (e_loss, g_loss)."""
    data = np.asarray(data, dtype=np.float64)
    gnames = set(generator.param_names())
    enames = set(energy.param_names())
    hist = []
    for _ in range(steps):
        for _ in range(energy_steps):
            idx = rng.integers(data.shape[0], size=batch_size)
            tape = Tape()
            pv = store.to_vars(tape)
            el, gl = ebgan_losses(data[idx], generator, energy, pv, lam, alpha, batch_size, rng,
                                  latent_dim, margin=margin)
            g = tape.backward(el)
            for n in store.names():
                store.set_grad(n, tape.grad(g, pv[n]) if n in enames else np.zeros_like(store.value(n)))
            _masked_adam(store, enames, lr)
        tape = Tape()
        pv = store.to_vars(tape)
        el, gl = ebgan_losses(data[rng.integers(data.shape[0], size=batch_size)], generator, energy,
                              pv, lam, alpha, batch_size, rng, latent_dim, margin=margin)
        g = tape.backward(gl)
        for n in store.names():
            store.set_grad(n, tape.grad(g, pv[n]) if n in gnames else np.zeros_like(store.value(n)))
        _masked_adam(store, gnames, lr)
        hist.append((el.item(), gl.item()))
    return hist


def _masked_adam(store: ParamStore, names, lr):
    from ..optim import adam_step

    adam_step(store.view([n for n in store.names() if n in names]), lr)


def generator_samples(generator: Block, store: ParamStore, n: int, latent_dim: int, rng) -> np.ndarray:
    t = Tape()
    return generator(t.const(rng.standard_normal((n, latent_dim))), store.to_vars(t)).value
