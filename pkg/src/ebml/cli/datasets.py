"""Synthetic dataset generators and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import RngStream


@dataclass
class Dataset:
    """Feature matrix with optional targets and a note on where it came from.

    ``targets`` may be class indices, reals, or (for sequence data) a list of
    integer arrays; ``meta`` holds generator-side ground truth such as blob
    centers.
    """

    features: np.ndarray
    targets: object = None
    provenance: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1) if self.features.size else \
                self.features.reshape(0, 0)
        if self.targets is not None and len(self.targets) != len(self.features):
            raise ValueError(f"row counts disagree: {len(self.features)} features, "
                             f"{len(self.targets)} targets")

    def __len__(self):
        return len(self.features)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        t = self.targets
        if t is not None:
            t = [t[i] for i in idx] if isinstance(t, list) else np.asarray(t)[idx]
        return Dataset(self.features[idx], t, self.provenance, dict(self.meta))


# generators -------------------------------------------------------------------

def gaussian_blobs(rng, n: int = 300, centers: int = 3, dim: int = 2, sigma: float = 1.0,
                   separation: float = 5.0, means=None) -> Dataset:
    """Isotropic blobs. Default means sit on a circle (radius chosen so
    neighbours are ``separation`` σ apart) or are passed explicitly."""
    if means is None:
        K = int(centers)
        if K == 1:
            means = np.zeros((1, dim))
        else:
            r = separation * sigma / (2 * math.sin(math.pi / K))
            ang = 2 * math.pi * np.arange(K) / K
            means = np.zeros((K, dim))
            means[:, 0], means[:, 1 % dim] = r * np.cos(ang), r * np.sin(ang)
    means = np.asarray(means, dtype=np.float64)
    K, dim = means.shape
    y = np.arange(n) % K
    rng.shuffle(y)
    X = means[y] + sigma * rng.standard_normal((n, dim))
    return Dataset(X, y, meta={"means": means, "sigma": sigma})


def two_moons(rng, n: int = 200, noise: float = 0.1) -> Dataset:
    n1 = n // 2
    t = rng.uniform(0, math.pi, n)
    X = np.empty((n, 2))
    X[:n1, 0], X[:n1, 1] = np.cos(t[:n1]), np.sin(t[:n1])
    X[n1:, 0], X[n1:, 1] = 1 - np.cos(t[n1:]), 0.5 - np.sin(t[n1:])
    X += noise * rng.standard_normal((n, 2))
    y = np.r_[np.zeros(n1, int), np.ones(n - n1, int)]
    perm = rng.permutation(n)
    return Dataset(X[perm], y[perm])


def linear_regression(rng, n: int = 200, dim: int = 3, noise: float = 0.1, weights=None,
                      bias: float = 0.0) -> Dataset:
    w = rng.standard_normal(dim) if weights is None else np.asarray(weights, dtype=np.float64)
    X = rng.standard_normal((n, len(w)))
    y = X @ w + bias + noise * rng.standard_normal(n)
    return Dataset(X, y, meta={"weights": w, "bias": bias})


def sinusoid(rng, n: int = 400, noise: float = 0.1, bimodal: bool = False,
             offset: float = 1.0) -> Dataset:
    """y = sin(2πx) + noise; with ``bimodal`` the curve is shifted up or down
    by ``offset`` with equal probability, giving a two-branch conditional."""
    x = rng.uniform(0, 1, n)
    y = np.sin(2 * math.pi * x) + noise * rng.standard_normal(n)
    if bimodal:
        y += offset * np.where(rng.random(n) < 0.5, 1.0, -1.0)
    return Dataset(x.reshape(-1, 1), y, meta={"bimodal": bool(bimodal)})


def markov_sequences(rng, n: int = 100, length: int = 8, n_symbols: int = 3,
                     transition=None, stickiness: float = 0.7) -> Dataset:
    """Integer sequences from a first-order Markov chain."""
    C = int(n_symbols)
    if transition is None:
        P = np.full((C, C), (1 - stickiness) / max(C - 1, 1))
        np.fill_diagonal(P, stickiness if C > 1 else 1.0)
    else:
        P = np.asarray(transition, dtype=np.float64)
    cum = np.cumsum(P, axis=1)
    seqs = np.empty((n, length), dtype=int)
    seqs[:, 0] = rng.integers(0, C, n)
    for t in range(1, length):
        u = rng.random(n)
        seqs[:, t] = np.minimum((u[:, None] > cum[seqs[:, t - 1]]).sum(axis=1), C - 1)
    return Dataset(seqs.astype(np.float64), [s for s in seqs], meta={"transition": P})


def bandit_log(rng, n: int = 500, rewards=(1.0, 0.0), noise: float = 0.0) -> Dataset:
    """Logged (action, reward) pairs under a uniform behaviour policy."""
    R = np.asarray(rewards, dtype=np.float64)
    a = rng.integers(0, len(R), n)
    r = R[a] + noise * rng.standard_normal(n)
    return Dataset(a.reshape(-1, 1).astype(np.float64), r, meta={"rewards": R})


GENERATORS = {
    "gaussian-blobs": gaussian_blobs,
    "two-moons": two_moons,
    "linear-regression": linear_regression,
    "sinusoid": sinusoid,
    "markov-sequences": markov_sequences,
    "bandit-log": bandit_log,
}


def generate_dataset(kind: str, params: dict | None, seed: int) -> Dataset:
    """Deterministic in (kind, params, seed)."""
    if kind not in GENERATORS:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {sorted(GENERATORS)}")
    rng = RngStream(seed).derive(f"data.{kind}").gen
    try:
        ds = GENERATORS[kind](rng, **(params or {}))
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from None
    ds.provenance = f"{kind}:seed={seed}"
    return ds


# CSV ----------------------------------------------------------------------------

class CsvFormatError(ValueError):
    pass


def load_csv(path, schema: dict | None = None) -> Dataset:
    """Numeric CSV; an optional header row of non-numeric names is skipped.

    ``schema`` may contain ``target``: "class", "real" or "none" (default);
    when present, the final column becomes the target.
    """
    target = (schema or {}).get("target", "none")
    rows, width = [], None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise CsvFormatError(f"{path}:{lineno}: non-numeric field in {rec!r}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise CsvFormatError(f"{path}:{lineno}: expected {width} fields, got {len(vals)}")
            if not all(math.isfinite(v) for v in vals):
                raise CsvFormatError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    prov = str(Path(path))
    if not rows:
        return Dataset(np.zeros((0, 0)), None if target == "none" else np.zeros(0), prov)
    A = np.array(rows)
    if target == "none":
        return Dataset(A, None, prov)
    y = A[:, -1]
    if target == "class":
        if np.any(y != np.round(y)) or np.any(y < 0):
            raise CsvFormatError(f"{path}: class targets must be non-negative integers")
        y = y.astype(int)
    return Dataset(A[:, :-1], y, prov)


def save_csv(path, ds: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for i, row in enumerate(ds.features):
            vals = [format(float(v), ".17g") for v in row]
            if ds.targets is not None and not isinstance(ds.targets, list):
                t = ds.targets[i]
                vals.append(str(int(t)) if np.issubdtype(np.asarray(t).dtype, np.integer)
                            else format(float(t), ".17g"))
            w.writerow(vals)
