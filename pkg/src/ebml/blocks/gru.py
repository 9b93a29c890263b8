from __future__ import annotations

import numpy as np

from ..autodiff import ShapeError, Var, ops
from .base import Block, affine


class GruBlock(Block):
    """Gated recurrent unit with a learned initial state ``h0`` (initialised to 0)."""

    def __init__(self, name: str, n_in: int, n_hidden: int):
        super().__init__(name)
        self.n_in, self.n_hidden = int(n_in), int(n_hidden)

    def param_shapes(self):
        D, H = self.n_in, self.n_hidden
        shapes = {}
        for g in ("r", "u", "h"):
            shapes[f"W_{g}"] = (H, D)
            shapes[f"U_{g}"] = (H, H)
            shapes[f"b_{g}"] = (H,)
        shapes["h0"] = (H,)
        return shapes

    def initial_state(self, params, batch: int | None = None) -> Var:
        h0 = self.p(params, "h0")
        if batch is None:
            return h0
        return np.zeros((batch, self.n_hidden)) + h0

    def __call__(self, x, h, params):
        return gru_step(x, h, self, params)


def gru_step(x: Var, h_prev: Var, block: GruBlock, params) -> Var:
    """One GRU update; x and h_prev are vectors or matching batches of rows."""
    if x.shape[-1] != block.n_in or h_prev.shape[-1] != block.n_hidden:
        raise ShapeError(f"gru_step: got x {x.shape}, h {h_prev.shape} for block "
                         f"({block.n_in} -> {block.n_hidden})")
    P = lambda k: block.p(params, k)  # noqa: E731
    r = ops.sigmoid(affine(P("W_r"), x) + affine(P("U_r"), h_prev) + P("b_r"))
    u = ops.sigmoid(affine(P("W_u"), x) + affine(P("U_u"), h_prev) + P("b_u"))
    cand = ops.tanh(affine(P("W_h"), x) + affine(P("U_h"), r * h_prev) + P("b_h"))
    return u * h_prev + (1.0 - u) * cand


def gru_run(xs, block: GruBlock, params, h0: Var | None = None) -> list[Var]:
    """Sweep a sequence (list of vars or a (T, D) var); returns [h_1, ..., h_T]."""
    h = block.initial_state(params) if h0 is None else h0
    seq = [xs[t] for t in range(xs.shape[0])] if isinstance(xs, Var) else list(xs)
    out = []
    for x in seq:
        h = gru_step(x, h, block, params)
        out.append(h)
    return out
