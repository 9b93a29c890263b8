"""Bootstrap resampling, averaged ensembles and SGD snapshot collection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..autodiff import ParamStore


def bootstrap_indices(n: int, rng) -> np.ndarray:
    if n < 1:
        raise ValueError("cannot resample an empty dataset")
    return rng.integers(n, size=n)


def bootstrap_resample(D, rng):
    """Same-size draw with replacement. ``D`` is an array or a tuple of aligned arrays."""
    if isinstance(D, tuple):
        n = len(D[0])
        if any(len(a) != n for a in D):
            raise ValueError("arrays in a dataset tuple must have equal length")
        idx = bootstrap_indices(n, rng)
        return tuple(np.asarray(a)[idx] for a in D)
    D = np.asarray(D)
    return D[bootstrap_indices(len(D), rng)]


@dataclass
class EnsembleSet:
    """Uniformly weighted collection of frozen predictors ``member(x) -> prediction``."""

    members: list = field(default_factory=list)

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self.members), 1.0 / len(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def member_predictions(self, x) -> np.ndarray:
        return np.stack([np.asarray(m(x), dtype=np.float64) for m in self.members])


def bag_predict(ensemble: EnsembleSet, x) -> np.ndarray:
    """Arithmetic mean of member predictions."""
    return ensemble.member_predictions(x).mean(axis=0)


def bagging_gap(preds, y) -> tuple[float, float]:
    """(loss of the mean prediction, mean of member losses) under squared loss.

    The first never exceeds the second.
    """
    P = np.asarray(preds, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lm = float(np.mean(np.sum((P.mean(axis=0) - y) ** 2, axis=-1) if P.ndim > 2 else (P.mean(axis=0) - y) ** 2))
    ml = float(np.mean(np.sum((P - y) ** 2, axis=-1) if P.ndim > 2 else (P - y) ** 2))
    return lm, ml


def fit_bagged(X, y, fit: Callable, n_members: int, rng) -> EnsembleSet:
    """Fit one member per bootstrap resample; ``fit(X, y)`` returns a predictor."""
    members = []
    for _ in range(n_members):
        Xb, yb = bootstrap_resample((X, y), rng)
        members.append(fit(Xb, yb))
    return EnsembleSet(members)


class SnapshotCollector:
    """Training-loop hook that freezes parameters every ``interval`` steps after burn-in.

    A snapshot is taken at step t (1-based) when t % interval == 0 and
    t > burn_in. The default burn-in is 20% of the total steps.
    """

    def __init__(self, interval: int, total_steps: int, burn_in: int | None = None):
        if interval < 1:
            raise ValueError("snapshot interval must be at least 1")
        self.interval, self.total_steps = int(interval), int(total_steps)
        self.burn_in = int(0.2 * total_steps) if burn_in is None else int(burn_in)
        self.snapshots: list[ParamStore] = []
        self.steps: list[int] = []

    def __call__(self, step: int, store: ParamStore) -> None:
        if step % self.interval == 0 and step > self.burn_in:
            self.snapshots.append(store.copy(with_slots=False))
            self.steps.append(step)

    def to_ensemble(self, predict: Callable) -> EnsembleSet:
        """Wrap snapshots as members via ``predict(store, x)``."""
        return EnsembleSet([(lambda x, s=s: predict(s, x)) for s in self.snapshots])


def snapshot_collect(train_step: Callable, store: ParamStore, steps: int, interval: int,
                     predict: Callable, burn_in: int | None = None) -> tuple[EnsembleSet, SnapshotCollector]:
    """Run ``train_step(store, t)`` for t = 1..steps at a constant step size, collecting snapshots."""
    hook = SnapshotCollector(interval, steps, burn_in)
    for t in range(1, steps + 1):
        train_step(store, t)
        hook(t, store)
    if not hook.snapshots:
        raise ValueError("no snapshots were collected; check interval and burn-in")
    return hook.to_ensemble(predict), hook


def log_posterior_unnorm(theta, D, beta: float, log_prior: Callable | None, loss: Callable) -> float:
    """-β Σ_{x∈D} L(x; θ) + log p(θ).

    ``loss(theta, D)`` returns per-example losses (or their sum). A missing
    ``log_prior`` means a flat prior. Choosing β = α/|D| gives the
    regularised average-loss form.
    """
    if not beta > 0:
        raise ValueError("inverse temperature must be positive")
    total = float(np.sum(loss(theta, D)))
    lp = 0.0 if log_prior is None else float(log_prior(theta))
    return -beta * total + lp


def gaussian_log_prior(sigma_p: float) -> Callable:
    """log N(θ; 0, σ_p² I) up to its normalising constant."""
    def lp(theta):
        th = np.asarray(theta, dtype=np.float64)
        return -0.5 * float(np.sum(th ** 2)) / sigma_p ** 2

    return lp
