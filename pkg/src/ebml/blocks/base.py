"""Common plumbing for parameterised blocks."""

from __future__ import annotations

import numpy as np

from ..autodiff import ParamStore, ShapeError, Var, ops


class Block:
    """A differentiable unit whose parameters live in a :class:`ParamStore`.

    Parameter ``k`` of a block named ``name`` is stored under ``"name.k"``.
    Calling the block takes the input var and a dict of parameter vars (as
    produced by ``ParamStore.to_vars``).
    """

    def __init__(self, name: str):
        self.name = name

    def key(self, k: str) -> str:
        return f"{self.name}.{k}"

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        return {}

    def init_value(self, k: str, shape, rng) -> np.ndarray:
        """Weights ~ N(0, 1/fan_in), vectors (biases) zero."""
        if len(shape) == 1:
            return np.zeros(shape)
        fan_in = int(np.prod(shape[1:]))
        return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)

    def init_params(self, store: ParamStore, rng) -> ParamStore:
        for k, shape in self.param_shapes().items():
            store.add(self.key(k), self.init_value(k, shape, rng))
        return store

    def param_names(self) -> list[str]:
        return [self.key(k) for k in self.param_shapes()]

    def p(self, params: dict, k: str) -> Var:
        try:
            return params[self.key(k)]
        except KeyError:
            raise KeyError(f"block '{self.name}' is missing parameter '{self.key(k)}'") from None


def affine(W: Var, x: Var, b: Var | None = None) -> Var:
    """``W x + b`` for a vector x, or row-wise ``x Wᵀ + b`` for a batch."""
    if x.ndim == 1:
        if W.shape[1] != x.shape[0]:
            raise ShapeError(f"affine: weight {W.shape} does not accept input of size {x.shape[0]}")
        out = ops.matmul(W, x)
    elif x.ndim == 2:
        if W.shape[1] != x.shape[1]:
            raise ShapeError(f"affine: weight {W.shape} does not accept inputs {x.shape}")
        out = ops.matmul(x, ops.transpose(W))
    else:
        raise ShapeError(f"affine: input must be rank 1 or 2, got {x.shape}")
    return out if b is None else out + b
