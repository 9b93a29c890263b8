"""Gradient boosting with regression-tree weak learners and golden-section line search."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class SquaredLoss:
    """l(ŷ, y) = ½‖ŷ - y‖² per example."""

    def value(self, yhat, y) -> np.ndarray:
        d = np.asarray(yhat, dtype=np.float64) - y
        return 0.5 * (d ** 2 if d.ndim == 1 else np.sum(d ** 2, axis=-1))

    def grad(self, yhat, y) -> np.ndarray:
        return np.asarray(yhat, dtype=np.float64) - y


class AbsoluteLoss:
    """l(ŷ, y) = |ŷ - y| per example (subgradient 0 at the kink)."""

    def value(self, yhat, y):
        d = np.abs(np.asarray(yhat, dtype=np.float64) - y)
        return d if d.ndim == 1 else np.sum(d, axis=-1)

    def grad(self, yhat, y):
        return np.sign(np.asarray(yhat, dtype=np.float64) - y)


LOSSES = {"squared": SquaredLoss, "absolute": AbsoluteLoss}


@dataclass
class _Node:
    value: np.ndarray
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None


class RegressionTree:
    """Axis-aligned regression tree with constant leaves; depth 1 is a stump.

    Targets may be vectors; splits minimise the summed squared error.
    """

    def __init__(self, max_depth: int = 1, min_leaf: int = 1):
        if max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        self.max_depth, self.min_leaf = max_depth, min_leaf
        self.root: _Node | None = None
        self.vector = False

    def fit(self, X, T) -> "RegressionTree":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        T = np.asarray(T, dtype=np.float64)
        self.vector = T.ndim == 2
        T2 = T if self.vector else T[:, None]
        self.root = self._grow(X, T2, 0)
        return self

    def _grow(self, X, T, depth) -> _Node:
        node = _Node(T.mean(axis=0))
        n = X.shape[0]
        if depth >= self.max_depth or n < 2 * self.min_leaf:
            return node
        best = (np.sum((T - node.value) ** 2) - 1e-12, None, None)
        for f in range(X.shape[1]):
            order = np.argsort(X[:, f], kind="stable")
            xs, ts = X[order, f], T[order]
            cs, cs2 = np.cumsum(ts, axis=0), np.cumsum(np.sum(ts ** 2, axis=1))
            tot, tot2 = cs[-1], cs2[-1]
            k = np.arange(1, n)
            valid = (xs[1:] > xs[:-1]) & (k >= self.min_leaf) & (n - k >= self.min_leaf)
            if not valid.any():
                continue
            left_sse = cs2[:-1] - np.sum(cs[:-1] ** 2, axis=1) / k
            right_sse = (tot2 - cs2[:-1]) - np.sum((tot - cs[:-1]) ** 2, axis=1) / (n - k)
            sse = np.where(valid, left_sse + right_sse, np.inf)
            i = int(np.argmin(sse))
            if sse[i] < best[0]:
                best = (sse[i], f, 0.5 * (xs[i] + xs[i + 1]))
        if best[1] is None:
            return node
        node.feature, node.threshold = best[1], best[2]
        m = X[:, node.feature] <= node.threshold
        node.left = self._grow(X[m], T[m], depth + 1)
        node.right = self._grow(X[~m], T[~m], depth + 1)
        return node

    def predict(self, X) -> np.ndarray:
        if self.root is None:
            raise RuntimeError("tree is not fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        out = np.empty((X.shape[0], self.root.value.shape[0]))
        self._fill(self.root, X, np.arange(X.shape[0]), out)
        return out if self.vector else out[:, 0]

    def _fill(self, node, X, idx, out):
        if node.left is None:
            out[idx] = node.value
            return
        m = X[idx, node.feature] <= node.threshold
        self._fill(node.left, X, idx[m], out)
        self._fill(node.right, X, idx[~m], out)

    __call__ = predict

    def to_array(self) -> np.ndarray:
        """Preorder node table: feature, threshold, left, right, leaf values.

        Leaves have feature -1; children are row indices into the table.
        """
        rows = []

        def walk(node):
            i = len(rows)
            rows.append(None)
            if node.left is None:
                rows[i] = [-1.0, 0.0, -1.0, -1.0, *node.value]
                return i
            li, ri = walk(node.left), walk(node.right)
            rows[i] = [float(node.feature), node.threshold, float(li), float(ri), *node.value]
            return i

        if self.root is None:
            raise RuntimeError("tree is not fitted")
        walk(self.root)
        return np.array(rows, dtype=np.float64)

    @classmethod
    def from_array(cls, table, vector: bool = False) -> "RegressionTree":
        table = np.atleast_2d(np.asarray(table, dtype=np.float64))

        def build(i):
            r = table[int(i)]
            node = _Node(r[4:].copy(), int(r[0]), float(r[1]))
            if node.feature >= 0:
                node.left, node.right = build(r[2]), build(r[3])
            return node

        tree = cls(max_depth=0)
        tree.root = build(0)
        tree.vector = vector
        return tree


def tree_fitter(max_depth: int = 1) -> Callable:
    return lambda X, T: RegressionTree(max_depth).fit(X, T)


def boost_targets(f_pred, y, loss) -> np.ndarray:
    """-∇_ŷ l at ŷ = f(x); residuals y - f(x) for squared loss."""
    return -loss.grad(f_pred, y)


def boost_stage_fit(f_pred, D, loss, fitter: Callable):
    """Fit a weak learner to the negative loss gradient at the current predictions."""
    X, y = D
    return fitter(X, boost_targets(f_pred, np.asarray(y, dtype=np.float64), loss))


def golden_section(fn: Callable[[float], float], a: float, b: float, tol: float = 1e-6) -> float:
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x


def boost_line_search(f_pred, g_pred, y, loss, gamma_max: float = 4.0, tol: float = 1e-6) -> float:
    """argmin over γ ∈ [0, γ_max] of Σ l(f + γ g, y) by golden section; 0 when g ≡ 0.

    The end point 0 is also compared so that a stage never increases the loss.
    """
    g_pred = np.asarray(g_pred, dtype=np.float64)
    if not np.any(g_pred):
        return 0.0
    f_pred = np.asarray(f_pred, dtype=np.float64)
    total = lambda gm: float(np.sum(loss.value(f_pred + gm * g_pred, y)))  # noqa: E731
    gm = golden_section(total, 0.0, gamma_max, tol)
    return gm if total(gm) <= total(0.0) else 0.0


@dataclass
class BoostState:
    base: np.ndarray
    stages: list = field(default_factory=list)
    losses: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.broadcast_to(self.base, (X.shape[0],) + np.shape(self.base)).astype(np.float64).copy()
        for g, gm in self.stages:
            out = out + gm * g(X)
        return out

    __call__ = predict


def gradient_boost(X, y, n_stages: int = 10, loss=None, max_depth: int = 1,
                   fitter: Callable | None = None) -> BoostState:
    """Stagewise additive fit starting from the mean target."""
    loss = SquaredLoss() if loss is None else (LOSSES[loss]() if isinstance(loss, str) else loss)
    fitter = tree_fitter(max_depth) if fitter is None else fitter
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    st = BoostState(y.mean(axis=0))
    f = st.predict(X)
    st.losses.append(float(np.sum(loss.value(f, y))))
    for _ in range(n_stages):
        g = boost_stage_fit(f, (X, y), loss, fitter)
        gp = g(X)
        gm = boost_line_search(f, gp, y, loss)
        st.stages.append((g, gm))
        f = f + gm * gp
        st.losses.append(float(np.sum(loss.value(f, y))))
    return st
