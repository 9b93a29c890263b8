"""Select hyperparameters on validation data, then report on an untouched test split."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..stats import wald_ci
from .search import random_search, smbo_loop
from .space import HyperSpace


@dataclass
class Split:
    X: np.ndarray
    y: np.ndarray
    indices: np.ndarray

    @classmethod
    def of(cls, d) -> "Split":
        if isinstance(d, Split):
            return d
        X, y, idx = d
        return cls(np.asarray(X), np.asarray(y), np.asarray(idx))


def check_disjoint(**splits) -> None:
    names = list(splits)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            common = np.intersect1d(splits[a].indices, splits[b].indices)
            if common.size:
                raise ValueError(f"splits '{a}' and '{b}' share {common.size} indices, e.g. {common[0]}")


def zero_one_risk(predictor, X, y) -> float:
    return float(np.mean(np.asarray(predictor(X)) != np.asarray(y)))


def tune_then_report(space: HyperSpace, train_fn: Callable, D_train, D_val, D_test, budget: int, rng,
                     retrain_on: str = "train", method: str = "random", risk: Callable = zero_one_risk,
                     gamma: float = 0.95, **search_kw) -> dict:
    """Tune on validation risk, refit, and report test accuracy with a Wald interval.

    ``train_fn(params, X, y, seed)`` returns a predictor mapping X to labels.
    ``retrain_on`` is "train" or "train+val". The validation risk is kept
    in the report for reference only; the headline is the test metric.
    """
    tr, va, te = Split.of(D_train), Split.of(D_val), Split.of(D_test)
    check_disjoint(train=tr, val=va, test=te)
    if retrain_on not in ("train", "train+val"):
        raise ValueError("retrain_on must be 'train' or 'train+val'")
    touched = set()

    def evaluator(params, seed):
        touched.update(tr.indices.tolist())
        touched.update(va.indices.tolist())
        return risk(train_fn(params, tr.X, tr.y, seed), va.X, va.y)

    if method == "random":
        res = random_search(space, budget, evaluator, rng)
    elif method == "smbo":
        res = smbo_loop(space, evaluator, budget, search_kw.pop("batch_size", 5),
                        search_kw.pop("beta", 1e3), search_kw.pop("alpha", 0.0), rng, **search_kw)
    else:
        raise ValueError(f"unknown search method {method!r}")
    if res.best is None:
        raise RuntimeError("every tuning trial failed")
    if retrain_on == "train":
        Xf, yf = tr.X, tr.y
    else:
        Xf, yf = np.concatenate([tr.X, va.X]), np.concatenate([tr.y, va.y])
    final = train_fn(res.best.params, Xf, yf, res.best.seed)
    test_loss = risk(final, te.X, te.y)
    ci = wald_ci(test_loss, len(te.y), gamma)
    leaked = touched & set(te.indices.tolist())
    if leaked:
        raise RuntimeError("test indices were touched during tuning")
    return {
        "best_params": res.best.params,
        "test_accuracy": 1.0 - test_loss,
        "test_ci": [ci.lower, ci.upper],
        "ci_level": gamma,
        "validation_risk": res.best.risk,
        "n_trials": len(res.history),
        "retrained_on": retrain_on,
        "tuning_indices": sorted(touched),
        "history": res.history,
    }
