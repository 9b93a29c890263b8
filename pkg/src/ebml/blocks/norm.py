"""Batch and layer normalisation, plus fixed input whitening."""

from __future__ import annotations

import numpy as np

from ..autodiff import ContractError, ShapeError, Var, ops
from .base import Block


class SingularityError(np.linalg.LinAlgError):
    """Covariance is numerically rank deficient."""


class DegenerateBatchError(ValueError):
    """Batch statistics need at least two examples."""


class NormBlock(Block):
    """m + exp(s) * (x - mean) / sqrt(var + eps).

    ``mode='batch'`` normalises each feature over the batch and keeps running
    statistics for inference; ``mode='layer'`` normalises each example over
    its own dimensions and has no running state.
    """

    def __init__(self, name: str, dim: int, mode: str = "batch", momentum: float = 0.9,
                 eps: float = 1e-8):
        super().__init__(name)
        if mode not in ("batch", "layer"):
            raise ValueError(f"NormBlock mode must be 'batch' or 'layer', got {mode!r}")
        if not eps > 0:
            raise ValueError("NormBlock eps must be positive")
        self.dim, self.mode, self.momentum, self.eps = int(dim), mode, float(momentum), float(eps)
        self.running_mean = np.zeros(self.dim)
        self.running_var = np.ones(self.dim)

    def param_shapes(self):
        return {"m": (self.dim,), "s": (self.dim,)}

    def __call__(self, x, params, training: bool = True):
        if self.mode == "batch":
            return batch_norm(x, self, params, training)
        return layer_norm(x, self, params)


def batch_norm(X: Var, block: NormBlock, params, training: bool = True) -> Var:
    if X.ndim != 2 or X.shape[1] != block.dim:
        raise ShapeError(f"batch_norm: expected (N, {block.dim}) input, got {X.shape}")
    m, s = block.p(params, "m"), block.p(params, "s")
    if training:
        if X.shape[0] < 2:
            raise DegenerateBatchError(
                "batch_norm: a batch of one example would normalise to the shift alone")
        mu = ops.mean(X, axis=0)
        centred = X - mu
        var = ops.mean(ops.square(centred), axis=0)
        r = block.momentum
        block.running_mean = r * block.running_mean + (1 - r) * mu.value
        block.running_var = r * block.running_var + (1 - r) * var.value
        xhat = centred / ops.sqrt(var + block.eps)
    else:
        xhat = (X - block.running_mean) / np.sqrt(block.running_var + block.eps)
    return m + ops.exp(s) * xhat


def layer_norm(x: Var, block: NormBlock, params) -> Var:
    """Per-example normalisation over the feature dimension (vector or batch)."""
    m, s = block.p(params, "m"), block.p(params, "s")
    if x.shape[-1] != block.dim:
        raise ShapeError(f"layer_norm: expected last dimension {block.dim}, got {x.shape}")
    if block.dim < 2:
        raise ContractError("layer_norm needs at least two dimensions per example")
    if x.ndim == 1:
        mu = ops.mean(x)
        c = x - mu
        xhat = c / ops.sqrt(ops.mean(ops.square(c)) + block.eps)
    elif x.ndim == 2:
        xt = ops.transpose(x)
        c = xt - ops.mean(xt, axis=0)
        xhat = ops.transpose(c / ops.sqrt(ops.mean(ops.square(c), axis=0) + block.eps))
    else:
        raise ShapeError(f"layer_norm: input must be rank 1 or 2, got {x.shape}")
    return m + ops.exp(s) * xhat


RIDGE = 1e-8


def center_and_whiten(X, ridge: float = RIDGE):
    """Centre columns and apply the symmetric inverse square root of the covariance.

    Returns ``(X_white, mean, whitening_matrix)`` such that
    ``X_white = (X - mean) @ whitening_matrix``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DegenerateBatchError("center_and_whiten needs a (N, d) batch with N >= 2")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / X.shape[0]
    lam, V = np.linalg.eigh(cov)
    if lam.min() <= ridge:
        raise SingularityError(
            f"covariance is rank deficient (smallest eigenvalue {lam.min():.3g} <= ridge {ridge})")
    W = (V / np.sqrt(lam + ridge)) @ V.T
    return Xc @ W, mean, W


def apply_whitening(X, mean, W):
    return (np.asarray(X, dtype=np.float64) - mean) @ W
