"""Classification losses over per-class energies.

Lower energy means a more preferred class. Probabilities follow the
Boltzmann form p_i ∝ exp(-β e_i). Functions accept plain arrays, and the
margin and cross-entropy losses also accept tape variables so they can be
differentiated.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ParamStore, Tape, Var, ops
from .blocks import LinearBlock, Sequential


def _check_beta(beta):
    if beta < 0:
        raise ValueError(f"inverse temperature must be non-negative, got {beta}")


def energies_to_probs(e, beta: float = 1.0) -> np.ndarray:
    """Softmax of -β·e along the last axis, computed with max subtraction."""
    _check_beta(beta)
    a = -beta * np.asarray(e, dtype=np.float64)
    a = a - a.max(axis=-1, keepdims=True)
    p = np.exp(a)
    return p / p.sum(axis=-1, keepdims=True)


def predict(e) -> np.ndarray | int:
    """Lowest-energy class; ties go to the lowest index."""
    e = np.asarray(e, dtype=np.float64)
    return np.argmin(e, axis=-1) if e.ndim > 1 else int(np.argmin(e))


def zero_one_loss(e, y) -> int | np.ndarray:
    e = np.asarray(e, dtype=np.float64)
    yhat = predict(e)
    if e.ndim == 1:
        return int(yhat != int(y))
    return (yhat != np.asarray(y)).astype(int)


def _runner_up_index(e: np.ndarray, y) -> np.ndarray:
    """Lowest-energy class other than y, per row."""
    e = np.atleast_2d(e)
    y = np.atleast_1d(np.asarray(y, dtype=int))
    masked = e.copy()
    masked[np.arange(len(y)), y] = np.inf
    return np.argmin(masked, axis=1)


def margin_loss(e, y, m: float = 0.0):
    """max(0, m + e_y - e_y') with y' the best class other than y.

    For a batch (rows of energies) the mean over rows is returned.
    """
    if m < 0:
        raise ValueError("margin must be non-negative")
    if isinstance(e, Var):
        ev = e.value
        if ev.shape[-1] < 2:
            raise ValueError("margin loss needs at least two classes")
        yy = np.atleast_1d(np.asarray(y, dtype=int))
        alt = _runner_up_index(ev, yy)
        if e.ndim == 1:
            gap = e[int(yy[0])] - e[int(alt[0])] + m
            return ops.maximum_const(gap, 0.0)
        rows = np.arange(len(yy))
        gap = e[rows, yy] - e[rows, alt] + m
        return ops.mean(ops.maximum_const(gap, 0.0))
    e = np.asarray(e, dtype=np.float64)
    if e.shape[-1] < 2:
        raise ValueError("margin loss needs at least two classes")
    yy = np.atleast_1d(np.asarray(y, dtype=int))
    alt = _runner_up_index(e, yy)
    e2 = np.atleast_2d(e)
    rows = np.arange(len(yy))
    vals = np.maximum(0.0, m + e2[rows, yy] - e2[rows, alt])
    return float(vals[0]) if e.ndim == 1 else float(vals.mean())


def perceptron_loss(e, y):
    return margin_loss(e, y, 0.0)


def cross_entropy_loss(e, y, beta: float = 1.0):
    """-log p_y = β e_y + log Σ_j exp(-β e_j); batch input gives the mean."""
    _check_beta(beta)
    if isinstance(e, Var):
        lp = ops.log_softmax(e * (-beta), axis=-1)
        if e.ndim == 1:
            return -lp[int(y)]
        yy = np.asarray(y, dtype=int)
        return -ops.mean(lp[np.arange(len(yy)), yy])
    a = -beta * np.asarray(e, dtype=np.float64)
    mx = a.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(a - mx).sum(axis=-1)) + mx[..., 0]
    if a.ndim == 1:
        return float(lse - a[int(y)])
    yy = np.asarray(y, dtype=int)
    return float(np.mean(lse - a[np.arange(len(yy)), yy]))


# energy models ----------------------------------------------------------------

class EnergyModel:
    """Interface: per-class energies for an input, as a tape variable."""

    n_classes: int

    def init_params(self, store: ParamStore, rng) -> ParamStore:
        raise NotImplementedError

    def energies(self, x: Var, params: dict) -> Var:
        raise NotImplementedError

    def energy_values(self, x, store: ParamStore) -> np.ndarray:
        t = Tape()
        return self.energies(t.const(x), store.to_vars(t)).value


class LinearEnergy(EnergyModel):
    """e(x, y) = -w_yᵀx - b_y."""

    def __init__(self, n_in: int, n_classes: int, name: str = "energy"):
        self.n_classes = n_classes
        self.block = LinearBlock(name, n_in, n_classes)

    def init_params(self, store, rng):
        return self.block.init_params(store, rng)

    def energies(self, x, params):
        return -self.block(x, params)


class MlpEnergy(EnergyModel):
    """Two-layer network: e(x, ·) = -(U₂ tanh(U₁ x + c₁) + c₂)."""

    def __init__(self, n_in: int, n_hidden: int, n_classes: int, name: str = "energy",
                 activation: str = "tanh"):
        self.n_classes = n_classes
        self.net = Sequential(name, [LinearBlock(f"{name}.l0", n_in, n_hidden, activation),
                                     LinearBlock(f"{name}.l1", n_hidden, n_classes)])

    def init_params(self, store, rng):
        return self.net.init_params(store, rng)

    def energies(self, x, params):
        return -self.net(x, params)


def boltzmann_grad(model: EnergyModel, x, y: int, store: ParamStore,
                   beta: float = 1.0) -> dict[str, np.ndarray]:
    """∇e(x, y) - Σ_y' p(y'|x) ∇e(x, y'), with p at inverse temperature β.

    At β = 1 this is the gradient of the cross-entropy loss; for general β
    the cross-entropy gradient is β times this quantity.
    """
    tape = Tape()
    pvars = store.to_vars(tape)
    e = model.energies(tape.const(np.asarray(x, dtype=np.float64)), pvars)
    if e.ndim != 1:
        raise ValueError("boltzmann_grad expects a single example")
    p = energies_to_probs(e.value, beta)
    out = {n: np.zeros_like(store.value(n)) for n in pvars}
    for c in range(e.shape[0]):
        g = tape.backward(e[c])
        w = (1.0 if c == int(y) else 0.0) - p[c]
        if w == 0.0:
            continue
        for n, v in pvars.items():
            out[n] += w * tape.grad(g, v)
    return out
