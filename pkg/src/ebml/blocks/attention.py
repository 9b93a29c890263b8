from __future__ import annotations

import numpy as np

from ..autodiff import ContractError, ShapeError, Var, ops
from .base import Block
from .linear import LinearBlock
from .norm import NormBlock, layer_norm
from .position import DEFAULT_L, rope_rows


class AttentionBlock(Block):
    """Multi-head attention with output transform, layer norm and residual.

    h_i = LN(σ(linear_h(concat_heads v̂_i))) + linear_r(x_i). When the input
    and output widths match, the residual is the identity and has no
    parameters.
    """

    def __init__(self, name: str, d_in: int, d_out: int, n_heads: int = 1,
                 activation: str = "tanh", d_head: int | None = None):
        super().__init__(name)
        if d_head is None:
            if d_out % n_heads != 0:
                raise ShapeError(f"attention: {n_heads} heads do not divide width {d_out}")
            d_head = d_out // n_heads
        self.d_in, self.d_out, self.n_heads, self.d_head = d_in, d_out, n_heads, d_head
        self.heads = [
            {r: LinearBlock(f"{name}.head{h}.{r}", d_in, d_head) for r in ("q", "k", "v")}
            for h in range(n_heads)
        ]
        self.out = LinearBlock(f"{name}.out", n_heads * d_head, d_out, activation)
        self.ln = NormBlock(f"{name}.ln", d_out, mode="layer")
        self.residual = None if d_in == d_out else LinearBlock(f"{name}.res", d_in, d_out)

    def sub_blocks(self):
        bl = [b for head in self.heads for b in head.values()] + [self.out, self.ln]
        if self.residual is not None:
            bl.append(self.residual)
        return bl

    def init_params(self, store, rng):
        for b in self.sub_blocks():
            b.init_params(store, rng)
        return store

    def param_names(self):
        return [n for b in self.sub_blocks() for n in b.param_names()]

    def __call__(self, X, params, mask=None, queries=None, rope=None):
        return attention(X, self, params, mask=mask, queries=queries, rope=rope)


def _mask_parts(mask, shape):
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != shape:
        raise ShapeError(f"attention: mask shape {mask.shape} does not match scores {shape}")
    if np.any(np.isnan(mask)) or np.any(mask == -np.inf):
        raise ValueError("attention: mask entries must be finite or +inf")
    keep = ~np.isinf(mask)
    return keep, np.where(keep, mask, 0.0)


def attention(X: Var, block: AttentionBlock, params, mask=None, queries: Var | None = None,
              rope=None, return_weights: bool = False):
    """Attend from each query item to the items of ``X``.

    ``queries`` defaults to ``X`` itself; the residual path uses the query
    items. ``mask`` is an (N_q, N) array of 0 / +inf offsets subtracted from
    the scores. ``rope`` is an optional pair (query positions, key positions)
    that rotates queries and keys before the dot product.
    """
    if X.ndim != 2 or X.shape[1] != block.d_in:
        raise ShapeError(f"attention: expected (N, {block.d_in}) items, got {X.shape}")
    Xq = X if queries is None else queries
    if Xq.ndim != 2 or Xq.shape[1] != block.d_in:
        raise ShapeError(f"attention: expected (N_q, {block.d_in}) queries, got {Xq.shape}")
    shape = (Xq.shape[0], X.shape[0])
    keep = offset = None
    if mask is not None:
        keep, offset = _mask_parts(mask, shape)
        if not np.all(keep.any(axis=1)):
            bad = int(np.flatnonzero(~keep.any(axis=1))[0])
            raise ContractError(f"attention: row {bad} of the mask is fully masked")
    if rope is not None and block.d_head % 2 != 0:
        raise ShapeError("attention: rotary positions need an even head width")
    heads, weights = [], []
    for head in block.heads:
        q = head["q"](Xq, params)
        k = head["k"](X, params)
        v = head["v"](X, params)
        if rope is not None:
            qpos, kpos = rope[0], rope[1]
            L = rope[2] if len(rope) > 2 else DEFAULT_L
            q, k = rope_rows(q, qpos, L), rope_rows(k, kpos, L)
        scores = ops.matmul(q, ops.transpose(k))
        if keep is None:
            alpha = ops.softmax(scores, axis=1)
        else:
            if np.any(offset != 0):
                scores = scores - offset
            alpha = ops.masked_softmax(scores, keep, axis=1)
        heads.append(ops.matmul(alpha, v))
        weights.append(alpha.value)
    vhat = heads[0] if len(heads) == 1 else ops.concat(heads, axis=1)
    h = layer_norm(block.out(vhat, params), block.ln, params)
    res = Xq if block.residual is None else block.residual(Xq, params)
    H = h + res
    if return_weights:
        return H, weights
    return H
