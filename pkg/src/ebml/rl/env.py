"""Small enumerable environments: multi-armed bandits and finite Markov decision chains."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Episode:
    """States x_0..x_T, actions y_1..y_T and rewards s_1..s_T (stored 0-based)."""

    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.states and len(self.states) != len(self.actions) + 1:
            raise ValueError("an episode needs one more state than actions")
        if len(self.actions) != len(self.rewards):
            raise ValueError("actions and rewards must have equal length")

    def __len__(self) -> int:
        return len(self.actions)

    def returns(self, gamma: float) -> np.ndarray:
        return discounted_returns(self.rewards, gamma)


def discounted_return(rewards, gamma: float, t: int = 0) -> float:
    """Σ_{k≥0} γ^k s_{t+k}, with t a 0-based index into ``rewards``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("discount must lie in [0, 1]")
    r = np.asarray(rewards, dtype=np.float64)
    if not 0 <= t < r.shape[0]:
        raise IndexError(f"time index {t} outside an episode of length {r.shape[0]}")
    tail = r[t:]
    return float(np.sum(tail * gamma ** np.arange(tail.shape[0])))


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    """All returns at once via Q(t) = s_t + γ Q(t+1)."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("discount must lie in [0, 1]")
    r = np.asarray(rewards, dtype=np.float64)
    out = np.zeros_like(r)
    acc = 0.0
    for t in range(r.shape[0] - 1, -1, -1):
        acc = r[t] + gamma * acc
        out[t] = acc
    return out


class ToyEnv:
    """Finite environment with per-action transition matrices.

    ``transitions[y, i, j]`` is the probability of moving from state i to j
    under action y; every row must sum to 1. ``rewards`` is (S, C) for a
    reward that depends on the state and action, or (C, S, S) when it also
    depends on the next state. Terminal states end an episode and are worth 0.
    """

    def __init__(self, transitions, rewards, gamma: float = 0.9, terminal=(), start: int = 0,
                 reward_noise: float = 0.0, kind: str = "chain-mdp", max_steps: int = 100):
        P = np.asarray(transitions, dtype=np.float64)
        if P.ndim != 3 or P.shape[1] != P.shape[2]:
            raise ValueError("transitions must have shape (C, S, S)")
        if np.any(P < 0) or not np.allclose(P.sum(axis=2), 1.0, atol=1e-12):
            raise ValueError("every transition row must be a probability distribution")
        C, S, _ = P.shape
        R = np.asarray(rewards, dtype=np.float64)
        if R.shape == (S, C):
            R = np.broadcast_to(R.T[:, :, None], (C, S, S)).copy()
        if R.shape != (C, S, S):
            raise ValueError(f"rewards must have shape ({S}, {C}) or ({C}, {S}, {S})")
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        self.P, self.R, self.gamma = P, R, float(gamma)
        self.n_actions, self.n_states = C, S
        self.terminal = np.zeros(S, dtype=bool)
        self.terminal[list(terminal)] = True
        self.start, self.reward_noise, self.kind, self.max_steps = start, reward_noise, kind, max_steps

    @classmethod
    def bandit(cls, reward_table, reward_noise: float = 0.0, gamma: float = 0.0) -> "ToyEnv":
        """One state, one step per episode; arm y pays reward_table[y] (+ noise)."""
        r = np.asarray(reward_table, dtype=np.float64)
        C = r.shape[0]
        P = np.zeros((C, 2, 2))
        P[:, :, 1] = 1.0
        R = np.zeros((C, 2, 2))
        R[:, 0, :] = r[:, None]
        return cls(P, R, gamma, terminal=(1,), start=0, reward_noise=reward_noise, kind="bandit",
                   max_steps=1)

    @classmethod
    def chain(cls, n_states: int = 5, p_success: float = 1.0, goal_reward: float = 1.0,
              gamma: float = 0.9) -> "ToyEnv":
        """Action 1 moves right with probability p_success, action 0 moves left.

        Entering the last state pays ``goal_reward`` and ends the episode.
        """
        S = n_states
        P = np.zeros((2, S, S))
        for i in range(S):
            left, right = max(i - 1, 0), min(i + 1, S - 1)
            P[0, i, left] += p_success
            P[0, i, right] += 1 - p_success
            P[1, i, right] += p_success
            P[1, i, left] += 1 - p_success
        P[:, S - 1, :] = 0.0
        P[:, S - 1, S - 1] = 1.0
        R = np.zeros((2, S, S))
        R[:, : S - 1, S - 1] = goal_reward
        return cls(P, R, gamma, terminal=(S - 1,), start=0)

    @classmethod
    def from_config(cls, cfg: dict) -> "ToyEnv":
        kind = cfg.get("kind", "chain-mdp")
        if kind == "bandit":
            return cls.bandit(cfg["rewards"], cfg.get("reward_noise", 0.0), cfg.get("gamma", 0.0))
        if "transitions" in cfg:
            return cls(cfg["transitions"], cfg["rewards"], cfg.get("gamma", 0.9),
                       cfg.get("terminal", ()), cfg.get("start", 0), cfg.get("reward_noise", 0.0),
                       max_steps=cfg.get("max_steps", 100))
        return cls.chain(cfg.get("n_states", 5), cfg.get("p_success", 1.0),
                         cfg.get("goal_reward", 1.0), cfg.get("gamma", 0.9))

    def reset(self, rng=None) -> int:
        return self.start

    def step(self, x: int, y: int, rng) -> tuple[int, float, bool]:
        if self.terminal[x]:
            raise ValueError(f"state {x} is terminal")
        if not 0 <= y < self.n_actions:
            raise ValueError(f"action {y} outside [0, {self.n_actions})")
        xn = int(min(np.searchsorted(np.cumsum(self.P[y, x]), rng.random(), side="right"),
                     self.n_states - 1))
        s = self.R[y, x, xn]
        if self.reward_noise > 0:
            s = s + self.reward_noise * rng.standard_normal()
        return xn, float(s), bool(self.terminal[xn])

    def expected_reward(self) -> np.ndarray:
        """r(x, y) = Σ_x′ P(x′|x, y) R(x, y, x′), shape (S, C)."""
        return np.einsum("yij,yij->iy", self.P, self.R)

    # exact solvers -------------------------------------------------------------
    def q_policy(self, pi) -> np.ndarray:
        """Q^π from the linear Bellman system; terminal states have value 0."""
        pi = np.asarray(pi, dtype=np.float64)
        S, C = self.n_states, self.n_actions
        live = ~self.terminal
        r = self.expected_reward()
        # Q(x,y) = r(x,y) + γ Σ_x′ P(x′|x,y) [live x′] Σ_y′ π(y′|x′) Q(x′,y′)
        A = np.eye(S * C)
        for x in range(S):
            for y in range(C):
                row = x * C + y
                for xn in range(S):
                    if not live[xn]:
                        continue
                    for yn in range(C):
                        A[row, xn * C + yn] -= self.gamma * self.P[y, x, xn] * pi[xn, yn]
        Q = np.linalg.solve(A, r.ravel()).reshape(S, C)
        Q[self.terminal] = 0.0
        return Q

    def v_policy(self, pi) -> np.ndarray:
        return np.sum(np.asarray(pi) * self.q_policy(pi), axis=1)

    def value_iteration(self, tol: float = 1e-12, max_iter: int = 100000) -> tuple[np.ndarray, np.ndarray]:
        r = self.expected_reward()
        V = np.zeros(self.n_states)
        for _ in range(max_iter):
            Q = r + self.gamma * np.einsum("yij,j->iy", self.P, np.where(self.terminal, 0.0, V))
            Vn = np.where(self.terminal, 0.0, Q.max(axis=1))
            if np.max(np.abs(Vn - V)) < tol:
                V = Vn
                break
            V = Vn
        return V, Q


def generate_episode(env: ToyEnv, policy, rng, max_steps: int | None = None) -> Episode:
    """Roll out ``policy(x, rng) -> y`` from the start state until termination."""
    x = env.reset(rng)
    ep = Episode([x], [], [])
    for _ in range(max_steps or env.max_steps):
        y = int(policy(x, rng))
        x, s, done = env.step(x, y, rng)
        ep.states.append(x)
        ep.actions.append(y)
        ep.rewards.append(s)
        if done:
            break
    return ep
