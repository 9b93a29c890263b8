"""Score-function gradient estimators for a linear softmax policy."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..autodiff import ParamStore, Tape, ops
from ..blocks import LinearBlock


def one_hot(i, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[int(i)] = 1.0
    return v


class SoftmaxPolicy:
    """π(y | x) = softmax(U φ(x) + c)_y.

    With ``n_states`` set, x is a state index and φ is its one-hot code, so
    the policy is tabular. Otherwise x is used directly as the feature vector.
    """

    def __init__(self, n_actions: int, n_features: int, tabular: bool = True, name: str = "policy"):
        self.C, self.F, self.tabular = n_actions, n_features, tabular
        self.block = LinearBlock(name, n_features, n_actions)
        self.store = ParamStore()
        self.store.add(self.block.key("U"), np.zeros((n_actions, n_features)))
        self.store.add(self.block.key("c"), np.zeros(n_actions))

    @property
    def U(self) -> np.ndarray:
        return self.store.value(self.block.key("U"))

    @property
    def c(self) -> np.ndarray:
        return self.store.value(self.block.key("c"))

    def features(self, x) -> np.ndarray:
        return one_hot(x, self.F) if self.tabular else np.asarray(x, dtype=np.float64)

    def logits(self, x) -> np.ndarray:
        return self.U @ self.features(x) + self.c

    def probs(self, x) -> np.ndarray:
        a = self.logits(x)
        a = a - a.max()
        p = np.exp(a)
        return p / p.sum()

    def table(self, n_states: int) -> np.ndarray:
        return np.stack([self.probs(x) for x in range(n_states)])

    def sample(self, x, rng, n: int | None = None):
        cp = np.cumsum(self.probs(x))
        u = rng.random() if n is None else rng.random(n)
        y = np.minimum(np.searchsorted(cp, u, side="right"), self.C - 1)
        return int(y) if n is None else y

    def __call__(self, x, rng):
        return self.sample(x, rng)

    @property
    def n_params(self) -> int:
        return self.C * self.F + self.C

    def flat(self) -> np.ndarray:
        return self.store.flat()

    def set_flat(self, v) -> None:
        v = np.asarray(v, dtype=np.float64)
        k = self.C * self.F
        self.store.set_value(self.block.key("U"), v[:k].reshape(self.C, self.F))
        self.store.set_value(self.block.key("c"), v[k:])

    def grad_log_prob(self, x, y) -> np.ndarray:
        """Flattened ∇θ log π(y | x) as [vec(U), c]."""
        return self.grad_log_prob_batch(x, np.array([y]))[0]

    def grad_log_prob_batch(self, x, ys) -> np.ndarray:
        """Rows ∇θ log π(y_m | x) for an array of actions at one input."""
        ys = np.asarray(ys, dtype=int)
        d = -np.tile(self.probs(x), (ys.shape[0], 1))
        d[np.arange(ys.shape[0]), ys] += 1.0
        phi = self.features(x)
        return np.concatenate([(d[:, :, None] * phi[None, None, :]).reshape(ys.shape[0], -1), d], axis=1)

    def grad_log_prob_tape(self, x, y) -> np.ndarray:
        """Same gradient through the tape, used to cross-check the closed form."""
        t = Tape()
        pv = self.store.to_vars(t)
        lp = ops.log_softmax(self.block(t.const(self.features(x)), pv))[int(y)]
        g = t.backward(lp)
        return np.concatenate([t.grad(g, pv[k]).ravel() for k in self.store.names()])


def _reward_values(reward, ys, x, rng):
    if callable(reward):
        try:
            return np.array([reward(int(y), x, rng) for y in ys], dtype=np.float64)
        except TypeError:
            return np.array([reward(int(y), x) for y in ys], dtype=np.float64)
    return np.asarray(reward, dtype=np.float64)[np.asarray(ys, dtype=int)]


def _baseline_value(baseline, x) -> float:
    if baseline is None:
        return 0.0
    return float(baseline(x)) if callable(baseline) else float(baseline)


def estimator_samples(x, policy: SoftmaxPolicy, reward, baseline, M: int, rng) -> np.ndarray:
    """M independent draws of (R(ỹ) - b(x)) ∇ log π(ỹ | x), one per row."""
    ys = policy.sample(x, rng, n=M)
    R = _reward_values(reward, ys, x, rng)
    return (R - _baseline_value(baseline, x))[:, None] * policy.grad_log_prob_batch(x, ys)


def reinforce_grad(x, policy: SoftmaxPolicy, reward, rng) -> np.ndarray:
    """R(ỹ) ∇θ log π(ỹ | x) for a single sampled action.

    ``reward`` is a table indexed by action or a callable (y, x[, rng]).
    """
    return estimator_samples(x, policy, reward, None, 1, rng)[0]


def baseline_grad(x, policy: SoftmaxPolicy, reward, baseline, rng) -> np.ndarray:
    """(R(ỹ) - b(x)) ∇θ log π(ỹ | x); ``baseline`` is a constant or callable of x."""
    return estimator_samples(x, policy, reward, baseline, 1, rng)[0]


def grad_variance(x, policy: SoftmaxPolicy, reward, baseline, M: int, rng) -> float:
    """E‖ĝ‖² - ‖Eĝ‖² estimated from M draws (trace of the estimator covariance)."""
    if M < 2:
        raise ValueError("need at least two draws")
    G = estimator_samples(x, policy, reward, baseline, M, rng)
    return float(np.mean(np.sum(G ** 2, axis=1)) - np.sum(G.mean(axis=0) ** 2))


def exact_policy_gradient(x, policy: SoftmaxPolicy, reward_table) -> np.ndarray:
    """Σ_y π(y|x) R(y) ∇ log π(y|x) by enumeration."""
    p = policy.probs(x)
    S = policy.grad_log_prob_batch(x, np.arange(policy.C))
    return (p * np.asarray(reward_table, dtype=np.float64)) @ S


def optimal_baseline(x, policy: SoftmaxPolicy, reward_table) -> float:
    """Variance-minimising constant E[R ‖s‖²] / E[‖s‖²], s = ∇ log π. Diagnostic only."""
    p = policy.probs(x)
    S = policy.grad_log_prob_batch(x, np.arange(policy.C))
    w = p * np.sum(S ** 2, axis=1)
    if w.sum() == 0:
        return 0.0
    return float(w @ np.asarray(reward_table, dtype=np.float64) / w.sum())


def make_noisy_reward(table, sigma: float) -> Callable:
    """Reward callable: table[y] plus N(0, σ²) noise drawn from the caller's rng."""
    table = np.asarray(table, dtype=np.float64)

    def reward(y, x, rng):
        return table[y] + sigma * rng.standard_normal()

    return reward
