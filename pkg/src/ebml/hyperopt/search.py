"""Random search and surrogate-guided sequential search over a HyperSpace."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..autodiff import ParamStore, Tape
from ..latent import MdnModel, mdn_loss
from ..optim import adam_step
from .space import HyperSpace, TrialRecord


@dataclass
class SearchResult:
    best: TrialRecord | None
    history: list = field(default_factory=list)

    def best_trace(self) -> np.ndarray:
        """Best risk so far after each trial (inf until the first success)."""
        out, cur = [], math.inf
        for t in self.history:
            if t.ok:
                cur = min(cur, t.risk)
            out.append(cur)
        return np.array(out)


def best_trial(history) -> TrialRecord | None:
    """Lowest risk among successful trials; the earliest wins ties."""
    best = None
    for t in history:
        if t.ok and (best is None or t.risk < best.risk):
            best = t
    return best


def run_trial(evaluator: Callable, params: dict, seed: int) -> TrialRecord:
    try:
        try:
            r = float(evaluator(params, seed))
        except TypeError:
            r = float(evaluator(params))
        if not np.isfinite(r):
            raise FloatingPointError(f"non-finite risk {r}")
        return TrialRecord(params, r, seed)
    except Exception as exc:  # noqa: BLE001 - failures are recorded, not raised
        return TrialRecord(params, math.nan, seed, "failed", f"{type(exc).__name__}: {exc}")


def random_search(space: HyperSpace, K: int, evaluator: Callable, rng,
                  prior: Callable | None = None) -> SearchResult:
    """K independent prior draws, each evaluated; failures are kept but never best."""
    if K < 1:
        raise ValueError("need at least one trial")
    prior = space.sample if prior is None else prior
    hist = []
    for _ in range(K):
        params = prior(rng)
        hist.append(run_trial(evaluator, params, int(rng.integers(2 ** 63))))
    return SearchResult(best_trial(hist), hist)


class MdnSurrogate:
    """Mixture density network from encoded λ to the standardised risk."""

    def __init__(self, space: HyperSpace, K: int = 3, hidden=(16,), steps: int = 300,
                 lr: float = 0.02):
        self.space, self.K, self.hidden, self.steps, self.lr = space, K, hidden, steps, lr
        self.model = None
        self.store = None
        self.mu, self.sd = 0.0, 1.0

    def fit(self, history, rng) -> "MdnSurrogate":
        ok = [t for t in history if t.ok]
        if not ok:
            raise ValueError("surrogate needs at least one successful trial")
        X = np.stack([self.space.encode(t.params) for t in ok])
        r = np.array([t.risk for t in ok])
        self.mu = float(r.mean())
        self.sd = float(r.std()) if len(r) > 1 and r.std() > 0 else 1.0
        Y = ((r - self.mu) / self.sd)[:, None]
        self.model = MdnModel(X.shape[1], 1, self.K, self.hidden, name="surrogate")
        self.store = ParamStore()
        self.model.init_params(self.store, rng)
        for _ in range(self.steps):
            t = Tape()
            pv = self.store.to_vars(t)
            loss = mdn_loss(t.const(X), Y, self.model, pv)
            self.store.collect_grads(t, t.backward(loss), pv)
            adam_step(self.store, self.lr)
        return self

    def sample(self, params: dict, M: int, rng) -> np.ndarray:
        """M draws of the risk at λ from the predictive mixture."""
        if self.model is None:
            raise RuntimeError("surrogate is not fitted")
        z = self.model.sample(self.space.encode(params), M, rng, self.store)[:, 0]
        return self.mu + self.sd * z

    def sample_many(self, points, M: int, rng) -> np.ndarray:
        """(len(points), M) risk draws, one row per point."""
        X = np.stack([self.space.encode(p) for p in points])
        return self.mu + self.sd * self.model.sample_batch(X, M, rng, self.store)[:, :, 0]


class GaussianSurrogate:
    """Fixed Gaussian predictive N(mean(λ), sd(λ)²); mostly for checking EI."""

    def __init__(self, mean: Callable | float, sd: Callable | float):
        self.mean, self.sd = mean, sd

    def _val(self, f, params):
        return float(f(params)) if callable(f) else float(f)

    def sample(self, params, M, rng):
        return self._val(self.mean, params) + self._val(self.sd, params) * rng.standard_normal(M)


def expected_improvement(params, surrogate, r_best: float, M: int, rng) -> float:
    """(1/M) Σ max(0, r̂_best - r_m) over surrogate draws r_m."""
    if M < 1:
        raise ValueError("need at least one draw")
    r = surrogate.sample(params, M, rng)
    return float(np.mean(np.maximum(0.0, r_best - r)))


def gaussian_ei(mean: float, sd: float, r_best: float) -> float:
    """Closed form for a Gaussian predictive: σ (z Φ(z) + φ(z)), z = (r̂_best - μ)/σ."""
    if sd <= 0:
        return max(0.0, r_best - mean)
    z = (r_best - mean) / sd
    Phi = 0.5 * math.erfc(-z / math.sqrt(2.0))
    phi = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return sd * (z * Phi + phi)


def selection_probs(ei, dist, beta: float, alpha: float) -> np.ndarray:
    """Normalised exp(β EI - α D) over a candidate pool."""
    a = beta * np.asarray(ei, dtype=np.float64) - alpha * np.asarray(dist, dtype=np.float64)
    a = a - a.max()
    w = np.exp(a)
    return w / w.sum()


def propose_from_pool(pool, ei, dist, beta: float, alpha: float, rng, n: int = 1):
    """Indices drawn from the pool without replacement, with the selection weights."""
    p = selection_probs(ei, dist, beta, alpha)
    n = min(n, len(pool))
    nz = int(np.count_nonzero(p))
    if n <= nz:
        idx = rng.choice(len(pool), size=n, replace=False, p=p)
    else:
        idx = np.concatenate([np.flatnonzero(p), rng.permutation(np.flatnonzero(p == 0))[: n - nz]])
    return idx, p


def candidate_pool(space: HyperSpace, incumbent, alpha: float, P: int, rng, scale: float = 0.1):
    """P prior draws, or neighbours of the incumbent when α > 0."""
    if alpha > 0 and incumbent is not None:
        return [space.neighbor(incumbent, rng, scale) for _ in range(P)]
    return [space.sample(rng) for _ in range(P)]


def smbo_propose(history, surrogate, beta: float, alpha: float, space: HyperSpace, pool_size: int,
                 rng, M: int = 256, distance: Callable | None = None, n: int = 1, pool=None):
    """Draw from q(λ) ∝ exp(β EI(λ) - α D(λ, λ̂)) over a finite candidate pool.

    ``pool`` fixes the candidates; otherwise ``pool_size`` are generated.
    Falls back to prior draws when the history has no successful trial.
    Returns a single point, or a list when n > 1.
    """
    if pool_size < 1:
        raise ValueError("pool size must be at least 1")
    inc = best_trial(history)
    if inc is None:
        pts = [space.sample(rng) for _ in range(n)]
        return pts[0] if n == 1 else pts
    distance = space.distance if distance is None else distance
    if pool is None:
        pool = candidate_pool(space, inc.params, alpha, pool_size, rng)
    if hasattr(surrogate, "sample_many"):
        ei = np.mean(np.maximum(0.0, inc.risk - surrogate.sample_many(pool, M, rng)), axis=1)
    else:
        ei = np.array([expected_improvement(c, surrogate, inc.risk, M, rng) for c in pool])
    dist = np.array([distance(c, inc.params) for c in pool])
    idx, _ = propose_from_pool(pool, ei, dist, beta, alpha, rng, n)
    pts = [pool[i] for i in idx]
    return pts[0] if n == 1 else pts


def smbo_loop(space: HyperSpace, evaluator: Callable, budget: int, batch_size: int, beta: float,
              alpha: float, rng, n_init: int = 5, pool_size: int = 100, M: int = 256,
              surrogate_factory: Callable | None = None) -> SearchResult:
    """Random initial design, then repeat: fit the surrogate, propose a batch, evaluate."""
    if budget < n_init:
        raise ValueError("budget must cover the initial random trials")
    surrogate_factory = surrogate_factory or (lambda: MdnSurrogate(space))
    hist = []
    for _ in range(n_init):
        params = space.sample(rng)
        hist.append(run_trial(evaluator, params, int(rng.integers(2 ** 63))))
    while len(hist) < budget:
        n = min(batch_size, budget - len(hist))
        if best_trial(hist) is None:
            batch = [space.sample(rng) for _ in range(n)]
        else:
            sur = surrogate_factory().fit(hist, rng)
            batch = smbo_propose(hist, sur, beta, alpha, space, pool_size, rng, M, n=n)
            batch = batch if isinstance(batch, list) else [batch]
        for params in batch:
            hist.append(run_trial(evaluator, params, int(rng.integers(2 ** 63))))
    return SearchResult(best_trial(hist), hist)


def history_rows(space: HyperSpace, history) -> tuple[list[str], list[list]]:
    """CSV header and rows: one column per dimension, then risk, seed, status."""
    header = space.names + ["risk", "seed", "status"]
    rows = [[t.params[n] for n in space.names] + [t.risk, t.seed, t.status] for t in history]
    return header, rows
