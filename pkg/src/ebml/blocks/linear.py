from __future__ import annotations

from ..autodiff import ops
from .base import Block, affine


class LinearBlock(Block):
    """σ(U x + c) with U of shape (out, in).

    Acts on a single vector or on a batch of row vectors.
    """

    def __init__(self, name: str, n_in: int, n_out: int, activation: str = "identity"):
        super().__init__(name)
        self.n_in, self.n_out = int(n_in), int(n_out)
        self.activation = activation
        self._act = ops.activation(activation)

    def param_shapes(self):
        return {"U": (self.n_out, self.n_in), "c": (self.n_out,)}

    def __call__(self, x, params):
        return self._act(affine(self.p(params, "U"), x, self.p(params, "c")))


class IdentityBlock(Block):
    """Returns its input unchanged; has no parameters."""

    def __call__(self, x, params):
        return x


class Sequential(Block):
    """Blocks applied one after another; parameter names stay per block."""

    def __init__(self, name: str, blocks):
        super().__init__(name)
        self.blocks = list(blocks)

    def param_shapes(self):
        return {}

    def init_params(self, store, rng):
        for b in self.blocks:
            b.init_params(store, rng)
        return store

    def param_names(self):
        return [n for b in self.blocks for n in b.param_names()]

    def __call__(self, x, params):
        for b in self.blocks:
            x = b(x, params)
        return x


def mlp(name: str, sizes, activation: str = "tanh", out_activation: str = "identity") -> Sequential:
    """Stack of linear blocks with the given layer widths."""
    layers = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        act = out_activation if i == len(sizes) - 2 else activation
        layers.append(LinearBlock(f"{name}.l{i}", a, b, act))
    return Sequential(name, layers)
