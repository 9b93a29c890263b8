from __future__ import annotations

import numpy as np

from ..autodiff import ShapeError, Var, ops
from .base import Block


class Conv1dBlock(Block):
    """K filters of length 2M+1 over a sequence of d-vectors, zero padded.

    Filters are stored as a (d, K, 2M+1) tensor; slice ``[:, k, j]`` is the
    weight vector applied to the input at offset ``j - M``.
    """

    def __init__(self, name: str, d: int, K: int, M: int):
        super().__init__(name)
        if M < 0:
            raise ValueError("half-width M must be non-negative")
        self.d, self.K, self.M = int(d), int(K), int(M)

    @property
    def width(self) -> int:
        return 2 * self.M + 1

    def param_shapes(self):
        return {"f": (self.d, self.K, self.width)}

    def init_value(self, k, shape, rng):
        return rng.normal(0.0, 1.0 / np.sqrt(self.d * self.width), size=shape)

    def __call__(self, x, params):
        return conv1d(x, self, params)


def conv1d(x: Var, block: Conv1dBlock, params) -> Var:
    """h[t, k] = sum over offsets o in [-M, M] of x[t+o] . f[:, k, o+M]."""
    if x.ndim != 2:
        raise ShapeError(f"conv1d: input must be (T, d), got {x.shape}")
    T, d = x.shape
    if d != block.d:
        raise ShapeError(f"conv1d: filters expect {block.d} channels, input has {d}")
    f = block.p(params, "f")
    M = block.M
    if M > 0:
        pad = np.zeros((M, d))
        x = ops.concat([pad, x, pad], axis=0)
    out = None
    for j in range(block.width):
        term = ops.matmul(x[j:j + T], f[:, :, j])
        out = term if out is None else out + term
    return out
