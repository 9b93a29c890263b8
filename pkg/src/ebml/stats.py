"""Generalisation bounds, interval estimates, bias-variance terms and resampling splits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ensemble import bootstrap_resample


def _check_bound_input(N, delta):
    if N < 1:
        raise ValueError("sample count must be at least 1")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"failure probability must lie in (0, 1), got {delta}")


def hoeffding_epsilon(N: int, delta: float) -> float:
    """√(ln(2/δ) / (2N))."""
    _check_bound_input(N, delta)
    return math.sqrt(math.log(2.0 / delta) / (2.0 * N))


def finite_class_epsilon(N: int, delta: float, n_hypotheses: int) -> float:
    """√((ln|Θ| + ln(2/δ)) / (2N)), solving 2|Θ| exp(-2Nε²) = δ for ε."""
    _check_bound_input(N, delta)
    if n_hypotheses < 1:
        raise ValueError("hypothesis count must be at least 1")
    return math.sqrt((math.log(n_hypotheses) + math.log(2.0 / delta)) / (2.0 * N))


def bernoulli_kl(p: float, q: float) -> float:
    """KL(Bern(p) || Bern(q)) with 0·log 0 = 0; +inf when q is 0 or 1 and p differs."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    out = 0.0
    for a, b in ((p, q), (1.0 - p, 1.0 - q)):
        if a == 0.0:
            continue
        if b == 0.0:
            return math.inf
        out += a * math.log(a / b)
    return max(out, 0.0)


def pac_bayes_rhs(N: int, delta: float, kl_qp: float) -> float:
    """(KL(Q||P) + ln((N+1)/δ)) / N."""
    _check_bound_input(N, delta)
    if kl_qp < 0:
        raise ValueError("KL divergence must be non-negative")
    return (kl_qp + math.log((N + 1) / delta)) / N


def pac_bayes_gap(N: int, delta: float, kl_qp: float) -> float:
    """Half-width after Pinsker: √(pac_bayes_rhs / 2)."""
    return math.sqrt(0.5 * pac_bayes_rhs(N, delta, kl_qp))


def bound_report(N: int, delta: float, n_hypotheses: int | None = None, kl_qp: float | None = None) -> dict:
    out = {"N": N, "delta": delta, "hoeffding_epsilon": hoeffding_epsilon(N, delta)}
    if n_hypotheses is not None:
        out["finite_class_epsilon"] = finite_class_epsilon(N, delta, n_hypotheses)
    if kl_qp is not None:
        out["pac_bayes_rhs"] = pac_bayes_rhs(N, delta, kl_qp)
        out["pac_bayes_gap"] = pac_bayes_gap(N, delta, kl_qp)
    return out


# normal distribution ---------------------------------------------------------

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00, 3.754408661907416e00)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF: Acklam's rational approximation plus one Halley step."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    lo = 0.02425
    if p < lo:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p <= 1.0 - lo:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    e = normal_cdf(x) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@dataclass
class WaldInterval:
    lower: float
    upper: float
    center: float
    half_width: float
    z: float
    small_sample: bool

    def __iter__(self):
        return iter((self.lower, self.upper))

    def contains(self, v: float) -> bool:
        return self.lower <= v <= self.upper


def wald_ci(mean_loss: float, N: int, gamma: float = 0.95) -> WaldInterval:
    """Accuracy interval (1 - l̄) ± Z_γ √(l̄(1 - l̄)/N) for a 0/1 loss average.

    ``small_sample`` flags N < 30, where the normal approximation is doubtful.
    """
    if not 0.0 <= mean_loss <= 1.0:
        raise ValueError("mean loss must lie in [0, 1]")
    if N < 1:
        raise ValueError("sample count must be at least 1")
    if not 0.0 < gamma < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    z = normal_quantile(0.5 + 0.5 * gamma)
    hw = z * math.sqrt(mean_loss * (1.0 - mean_loss) / N)
    c = 1.0 - mean_loss
    return WaldInterval(c - hw, c + hw, c, hw, z, N < 30)


# credible regions --------------------------------------------------------------

@dataclass
class CredibleRegion:
    intervals: list
    mass: float
    bin_width: float
    max_bin_mass: float

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def contains(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        out = np.zeros(v.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (v >= a) & (v <= b)
        return out


def fd_bin_edges(x) -> np.ndarray:
    """Histogram edges with the Freedman-Diaconis width 2·IQR·n^(-1/3)."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    q75, q25 = np.percentile(x, [75, 25])
    h = 2.0 * (q75 - q25) / len(x) ** (1.0 / 3.0)
    if not h > 0 or hi == lo:
        return np.array([lo, hi if hi > lo else lo + 1.0])
    n = max(1, int(np.ceil((hi - lo) / h)))
    return np.linspace(lo, lo + n * h, n + 1)


def credible_region(samples, gamma: float) -> CredibleRegion:
    """Highest-density region from a histogram: densest bins until mass ≥ γ, then merged."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 100:
        raise ValueError("credible_region needs at least 100 samples")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    edges = fd_bin_edges(x)
    counts, _ = np.histogram(x, bins=edges)
    mass = counts / x.size
    order = np.argsort(-counts, kind="stable")
    cum = np.cumsum(mass[order])
    n_keep = int(np.searchsorted(cum, gamma - 1e-12) + 1)
    keep = np.zeros(len(counts), dtype=bool)
    keep[order[:min(n_keep, len(order))]] = True
    keep &= counts > 0
    intervals = []
    i = 0
    while i < len(keep):
        if keep[i]:
            j = i
            while j + 1 < len(keep) and keep[j + 1]:
                j += 1
            intervals.append((float(edges[i]), float(edges[j + 1])))
            i = j + 1
        else:
            i += 1
    return CredibleRegion(intervals, float(mass[keep].sum()), float(edges[1] - edges[0]),
                          float(mass.max()))


# bias-variance -----------------------------------------------------------------

@dataclass
class BiasVariance:
    aleatoric: float
    variance: float
    bias2: float
    cross: float
    expected_error: float

    def __iter__(self):
        return iter((self.aleatoric, self.variance, self.bias2))


def bias_variance_decompose(y_samples, yhat_samples) -> BiasVariance:
    """Empirical E(y - μ_y)², E(ŷ - μ̂)², (μ_y - μ̂)², averaged over inputs.

    Arrays are (n_inputs, n_samples), or 1-D for a single input. The
    expected squared error pairs draws index by index when the sample
    counts match and uses all pairs otherwise; ``cross`` is the part of that
    error the three terms do not explain.
    """
    Y = np.atleast_2d(np.asarray(y_samples, dtype=np.float64))
    P = np.atleast_2d(np.asarray(yhat_samples, dtype=np.float64))
    if Y.shape[0] != P.shape[0]:
        raise ValueError("need the same number of inputs for targets and predictions")
    if Y.shape[1] < 2 or P.shape[1] < 2:
        raise ValueError("need at least two samples of y and of the prediction per input")
    my, mp = Y.mean(axis=1, keepdims=True), P.mean(axis=1, keepdims=True)
    alea = float(np.mean((Y - my) ** 2))
    var = float(np.mean((P - mp) ** 2))
    bias2 = float(np.mean((my - mp) ** 2))
    if Y.shape[1] == P.shape[1]:
        err = float(np.mean((Y - P) ** 2))
    else:
        err = float(np.mean((Y[:, :, None] - P[:, None, :]) ** 2))
    return BiasVariance(alea, var, bias2, err - (alea + var + bias2), err)


# resampling ----------------------------------------------------------------------

def bootstrap_distribution(D, statistic: Callable, M: int, rng) -> np.ndarray:
    """The statistic on M independent bootstrap resamples."""
    if M < 1:
        raise ValueError("need at least one resample")
    return np.array([statistic(bootstrap_resample(D, rng)) for _ in range(M)])


def kfold_split(N: int, K: int, rng) -> list[tuple[np.ndarray, np.ndarray]]:
    """K (train, validation) index pairs from contiguous blocks of a random permutation.

    Blocks have size ⌈N/K⌉ with the last one smaller. If that would leave a
    fold empty, near-equal blocks are used instead.
    """
    if K < 2:
        raise ValueError("need at least two folds")
    if K > N:
        raise ValueError(f"cannot split {N} items into {K} folds")
    perm = rng.permutation(N)
    b = -(-N // K)
    if (K - 1) * b < N:
        blocks = [perm[k * b:(k + 1) * b] for k in range(K)]
    else:
        blocks = np.array_split(perm, K)
    out = []
    for k in range(K):
        val = np.sort(blocks[k])
        train = np.sort(np.concatenate([blocks[j] for j in range(K) if j != k]))
        out.append((train, val))
    return out


def kfold_cv_loss(fit: Callable, loss: Callable, X, y, K: int, rng) -> float:
    """Average over folds of the validation loss of a model fit on the other folds."""
    X, y = np.asarray(X), np.asarray(y)
    vals = []
    for tr, va in kfold_split(len(X), K, rng):
        model = fit(X[tr], y[tr])
        vals.append(float(np.mean(loss(model, X[va], y[va]))))
    return float(np.mean(vals))
