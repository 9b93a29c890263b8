"""Learned value heads, TD learning and the actor-critic loop."""

from __future__ import annotations

import numpy as np

from ..autodiff import ParamStore, Tape, ops
from ..blocks import LinearBlock
from ..optim import Optimizer
from .env import ToyEnv
from .policy import SoftmaxPolicy, one_hot


class ValueNet:
    """b̂(x) = u·φ(x) + c; tabular when φ is a one-hot state code."""

    def __init__(self, n_features: int, tabular: bool = True, name: str = "value", n_out: int = 1):
        self.F, self.tabular, self.n_out = n_features, tabular, n_out
        self.block = LinearBlock(name, n_features, n_out)
        self.store = ParamStore()
        self.store.add(self.block.key("U"), np.zeros((n_out, n_features)))
        self.store.add(self.block.key("c"), np.zeros(n_out))

    def features(self, x) -> np.ndarray:
        return one_hot(x, self.F) if self.tabular else np.asarray(x, dtype=np.float64)

    def var(self, X: np.ndarray, params):
        return self.block(params[self.block.key("U")].tape.const(X), params)

    def __call__(self, x, store: ParamStore | None = None) -> np.ndarray | float:
        store = self.store if store is None else store
        out = store.value(self.block.key("U")) @ self.features(x) + store.value(self.block.key("c"))
        return float(out[0]) if self.n_out == 1 else out


def value_regression_loss(net: ValueNet, params, X: np.ndarray, R: np.ndarray):
    """Mean of ½ (b̂(x) - R)² over rows, on the tape."""
    pred = ops.reshape(net.var(X, params), (X.shape[0],))
    return ops.mean(ops.square(pred - R)) * 0.5


def mean_reward_baseline_fit(history, net: ValueNet, optimizer: Optimizer) -> float:
    """One regression step of the value head toward observed rewards. Returns the loss."""
    if not history:
        raise ValueError("empty reward history")
    X = np.stack([net.features(x) for x, _ in history])
    R = np.array([r for _, r in history], dtype=np.float64)
    t = Tape()
    pv = net.store.to_vars(t)
    loss = value_regression_loss(net, pv, X, R)
    net.store.collect_grads(t, t.backward(loss), pv)
    optimizer.step(net.store)
    return loss.item()


class ActorCritic:
    """Policy plus a Q head R̂(x, ·) with C outputs and an optional value head.

    ``baseline`` is "expectation" (Σ_y π(y|x) R̂(x, y)), "value" (learned
    b̂) or "none". The critic's TD target uses a frozen copy of the Q head
    refreshed every ``refresh_every`` updates.
    """

    def __init__(self, n_states: int, n_actions: int, baseline: str = "expectation",
                 refresh_every: int = 100, tabular: bool = True):
        if baseline not in ("expectation", "value", "none"):
            raise ValueError(f"unknown baseline {baseline!r}")
        self.S, self.C = n_states, n_actions
        self.policy = SoftmaxPolicy(n_actions, n_states, tabular=tabular)
        self.q = ValueNet(n_states, tabular=tabular, name="q", n_out=n_actions)
        self.value = ValueNet(n_states, tabular=tabular, name="value") if baseline == "value" else None
        self.baseline = baseline
        self.refresh_every = int(refresh_every)
        self.frozen = self.q.store.copy(with_slots=False)
        self.n_updates = 0

    def q_values(self, x, frozen: bool = False) -> np.ndarray:
        return np.atleast_1d(self.q(x, self.frozen if frozen else None))

    def q_table(self) -> np.ndarray:
        return np.stack([self.q_values(x) for x in range(self.S)])

    def baseline_value(self, x) -> float:
        if self.baseline == "expectation":
            return float(self.policy.probs(x) @ self.q_values(x))
        if self.baseline == "value":
            return float(self.value(x))
        return 0.0

    def refresh(self):
        self.frozen = self.q.store.copy(with_slots=False)


def advantage(x, y, ac: ActorCritic) -> float:
    """R̂(x, y) - b̂(x)."""
    if not 0 <= int(y) < ac.C:
        raise ValueError(f"action {y} outside [0, {ac.C})")
    return float(ac.q_values(x)[int(y)] - ac.baseline_value(x))


def td_update(transition, ac: ActorCritic, optimizer: Optimizer, gamma: float,
              terminal: bool = False) -> float:
    """Regress R̂(x_prev, y) toward s + γ R̂_frozen(x, y_next). Returns the TD error.

    ``transition`` is (x_prev, y, s, x, y_next); with ``terminal`` the
    bootstrap term is dropped.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("TD learning needs γ in [0, 1)")
    x_prev, y, s, x, y_next = transition
    boot = 0.0 if (terminal or gamma == 0.0) else gamma * ac.q_values(x, frozen=True)[int(y_next)]
    target = float(s) + boot
    # the head is linear, so the squared-error gradient has a closed form
    phi = ac.q.features(x_prev)
    err = float(ac.q_values(x_prev)[int(y)]) - target
    gU = np.zeros((ac.C, phi.shape[0]))
    gU[int(y)] = err * phi
    gc = np.zeros(ac.C)
    gc[int(y)] = err
    ac.q.store.set_grad(ac.q.block.key("U"), gU)
    ac.q.store.set_grad(ac.q.block.key("c"), gc)
    optimizer.step(ac.q.store)
    ac.n_updates += 1
    if ac.refresh_every > 0 and ac.n_updates % ac.refresh_every == 0:
        ac.refresh()
    return err


def td_evaluate(env: ToyEnv, ac: ActorCritic, steps: int, rng, alpha0: float = 0.5,
                decay: float = 1e-3, policy_table=None) -> np.ndarray:
    """TD policy evaluation with step size α₀ / (1 + decay·t).

    Returns the Q table with terminal rows set to 0.
    """
    if policy_table is not None:
        cum = np.cumsum(np.asarray(policy_table, dtype=np.float64), axis=1)
        pol = lambda x: int(min(np.searchsorted(cum[x], rng.random(), side="right"), env.n_actions - 1))  # noqa: E731
    else:
        pol = lambda x: ac.policy.sample(x, rng)  # noqa: E731
    x = env.reset(rng)
    y = pol(x)
    opt = Optimizer("sgd", alpha0)
    for t in range(steps):
        opt.alpha = alpha0 / (1.0 + decay * t)
        xn, s, done = env.step(x, y, rng)
        yn = 0 if done else pol(xn)
        td_update((x, y, s, xn, yn), ac, opt, env.gamma, terminal=done)
        if done:
            x = env.reset(rng)
            y = pol(x)
        else:
            x, y = xn, yn
    Q = ac.q_table()
    Q[env.terminal] = 0.0
    return Q


def actor_critic_train(env: ToyEnv, ac: ActorCritic, steps: int, rng, critic_lr: float = 0.1,
                       actor_lr: float = 0.1, value_lr: float = 0.1) -> dict:
    """Interleave a TD step for the critic and an advantage-weighted policy step."""
    gamma = min(env.gamma, 1.0 - 1e-12)
    copt = Optimizer("sgd", critic_lr)
    vopt = Optimizer("sgd", value_lr)
    log = {"reward": [], "td_error": [], "advantage": [], "episode_return": []}
    x = env.reset(rng)
    y = ac.policy.sample(x, rng)
    ep_ret, disc = 0.0, 1.0
    for _ in range(steps):
        xn, s, done = env.step(x, y, rng)
        yn = 0 if done else ac.policy.sample(xn, rng)
        A = advantage(x, y, ac)
        td = td_update((x, y, s, xn, yn), ac, copt, gamma, terminal=done)
        ac.policy.set_flat(ac.policy.flat() + actor_lr * A * ac.policy.grad_log_prob(x, y))
        if ac.value is not None:
            mean_reward_baseline_fit([(x, float(ac.q_values(x)[y]))], ac.value, vopt)
        log["reward"].append(s)
        log["td_error"].append(td)
        log["advantage"].append(A)
        ep_ret += disc * s
        disc *= env.gamma
        if done:
            log["episode_return"].append(ep_ret)
            ep_ret, disc = 0.0, 1.0
            x = env.reset(rng)
            y = ac.policy.sample(x, rng)
        else:
            x, y = xn, yn
    return log
