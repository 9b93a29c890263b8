"""Metropolis-Hastings with pluggable proposals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class MarkovChainState:
    x: np.ndarray
    rng: np.random.Generator
    step: int = 0
    accepted: int = 0
    logp: float | None = None

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.step if self.step else 0.0


@dataclass
class Proposal:
    """``sample(x, rng)`` draws x′; ``log_density(x_to, x_from)`` is log q(x_to | x_from)."""

    sample: Callable
    log_density: Callable


def gaussian_random_walk(scale: float) -> Proposal:
    def sample(x, rng):
        return np.asarray(x, dtype=np.float64) + scale * rng.standard_normal(np.shape(x))

    def log_density(x_to, x_from):
        d = np.asarray(x_to, dtype=np.float64) - x_from
        return float(-0.5 * np.sum(d ** 2) / scale ** 2 - 0.5 * d.size * np.log(2 * np.pi * scale ** 2))

    return Proposal(sample, log_density)


def independence_proposal(sample_fn: Callable, logpdf: Callable) -> Proposal:
    """Proposal that ignores the current point."""
    return Proposal(lambda x, rng: sample_fn(rng), lambda x_to, x_from: logpdf(x_to))


def mh_step(state: MarkovChainState, unnorm_logp: Callable, proposal: Proposal) -> MarkovChainState:
    """One accept/reject step; the acceptance ratio is evaluated in log space."""
    x = state.x
    lp_x = unnorm_logp(x) if state.logp is None else state.logp
    if lp_x == -np.inf:
        raise ValueError("current point has zero target density")
    xp = proposal.sample(x, state.rng)
    fwd = proposal.log_density(xp, x)
    if fwd == -np.inf:
        raise ValueError("proposal density is zero at the point it produced")
    lp_xp = unnorm_logp(xp)
    rev = proposal.log_density(x, xp)
    log_a = lp_xp - lp_x + rev - fwd
    state.step += 1
    if log_a >= 0 or np.log(state.rng.random()) < log_a:
        state.x, state.logp = xp, lp_xp
        state.accepted += 1
    else:
        state.logp = lp_x
    return state


def run_chain(state: MarkovChainState, unnorm_logp: Callable, proposal: Proposal, n_samples: int,
              burn_in: int = 1000, thin: int = 10) -> np.ndarray:
    """Discard ``burn_in`` steps, then keep every ``thin``-th state."""
    if thin < 1 or burn_in < 0:
        raise ValueError("thin must be >= 1 and burn_in >= 0")
    for _ in range(burn_in):
        mh_step(state, unnorm_logp, proposal)
    out = []
    for _ in range(n_samples):
        for _ in range(thin):
            mh_step(state, unnorm_logp, proposal)
        out.append(np.array(state.x, copy=True))
    return np.array(out)


def run_chains_gaussian_rw(x0, unnorm_logp_batch: Callable, scale: float, rng, n_samples: int,
                           burn_in: int = 1000, thin: int = 10) -> tuple[np.ndarray, float]:
    """Vectorised random-walk MH over independent chains (rows of x0).

    ``unnorm_logp_batch`` maps (S, d) points to (S,) log targets. Returns
    samples of shape (n_samples, S, d) and the overall acceptance rate.
    """
    x = np.atleast_2d(np.asarray(x0, dtype=np.float64)).copy()
    lp = unnorm_logp_batch(x)
    if np.any(lp == -np.inf):
        raise ValueError("a chain starts at a point of zero target density")
    acc = tot = 0
    out = []
    for t in range(burn_in + n_samples * thin):
        xp = x + scale * rng.standard_normal(x.shape)
        lpp = unnorm_logp_batch(xp)
        ok = np.log(rng.random(x.shape[0])) < lpp - lp
        x[ok], lp[ok] = xp[ok], lpp[ok]
        acc += int(ok.sum())
        tot += x.shape[0]
        if t >= burn_in and (t - burn_in + 1) % thin == 0:
            out.append(x.copy())
    return np.array(out), acc / tot
