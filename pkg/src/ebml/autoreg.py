"""Autoregressive models over a finite alphabet.

p(x_1..x_T) = Π_i p(x_i | x_<i). A placeholder symbol (index C in the
embedding table) stands in for the missing predecessor of x_1. Two
backbones share one interface: a GRU run over the shifted sequence, or
attention where the query for position i is the placeholder at position i
and may only look at items j < i.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ParamStore, Tape, Var, ops
from .blocks import AttentionBlock, GruBlock, LinearBlock, gru_step, sinusoidal_table
from .blocks.position import DEFAULT_L


def causal_mask(N: int) -> np.ndarray:
    """m_ij = 0 when j < i and +inf otherwise."""
    if N < 1:
        raise ValueError("mask size must be at least 1")
    i, j = np.indices((N, N))
    return np.where(j < i, 0.0, np.inf)


class ArModel:
    def __init__(self, n_symbols: int, backbone: str = "gru", d_embed: int = 8, d_hidden: int = 16,
                 n_heads: int = 1, rope: bool = False, L: float = DEFAULT_L, name: str = "ar"):
        if n_symbols < 1:
            raise ValueError("alphabet must have at least one symbol")
        if backbone not in ("gru", "attention"):
            raise ValueError(f"unknown backbone {backbone!r}")
        if backbone == "attention" and d_embed % 2 != 0:
            raise ValueError("attention backbone needs an even embedding width")
        self.C, self.backbone, self.name = n_symbols, backbone, name
        self.d_embed, self.d_hidden, self.rope, self.L = d_embed, d_hidden, rope, L
        self.placeholder = n_symbols
        if backbone == "gru":
            self.core = GruBlock(f"{name}.gru", d_embed, d_hidden)
        else:
            self.core = AttentionBlock(f"{name}.attn", d_embed, d_hidden, n_heads)
        self.head = LinearBlock(f"{name}.head", d_hidden, n_symbols)

    @property
    def emb_key(self) -> str:
        return f"{self.name}.emb"

    def init_params(self, store: ParamStore, rng) -> ParamStore:
        store.add(self.emb_key, rng.normal(0, 1.0, (self.C + 1, self.d_embed)))
        self.core.init_params(store, rng)
        self.head.init_params(store, rng)
        return store

    def zero_head(self, store: ParamStore) -> None:
        for k in self.head.param_names():
            store.set_value(k, np.zeros_like(store.value(k)))

    def check_symbols(self, seq) -> np.ndarray:
        s = np.asarray(seq)
        if s.size and (not np.issubdtype(s.dtype, np.integer)):
            if not np.all(s == np.round(s)):
                raise ValueError("symbols must be integers")
            s = s.astype(int)
        s = s.astype(int).ravel() if s.ndim <= 1 else s.astype(int)
        if s.size and (s.min() < 0 or s.max() >= self.C):
            bad = s[(s < 0) | (s >= self.C)].ravel()[0]
            raise ValueError(f"symbol {bad} is outside the alphabet [0, {self.C})")
        return s

    # logits ------------------------------------------------------------------
    def logits(self, seq, params) -> Var:
        """(T, C) logits; row i-1 gives the conditional of x_i given x_<i."""
        s = self.check_symbols(seq)
        T = s.shape[0]
        if T == 0:
            raise ValueError("logits of an empty sequence")
        if self.backbone == "gru":
            return self._gru_logits(s[None, :], params)[0]
        return self._attention_logits(s, params)

    def batch_logits(self, seqs: np.ndarray, params) -> Var:
        """(B, T, C) logits for equal-length sequences."""
        S = self.check_symbols(np.atleast_2d(seqs))
        if self.backbone == "gru":
            return self._gru_logits(S, params)
        return ops.stack([self._attention_logits(s, params) for s in S], axis=0)

    def _gru_logits(self, S: np.ndarray, params) -> Var:
        B, T = S.shape
        E = params[self.emb_key]
        inp = np.concatenate([np.full((B, 1), self.placeholder), S[:, :-1]], axis=1)
        X = E[inp]
        h = self.core.initial_state(params, batch=B)
        outs = []
        for t in range(T):
            h = gru_step(X[:, t], h, self.core, params)
            outs.append(self.head(h, params))
        return ops.stack(outs, axis=1)

    def _attention_logits(self, s: np.ndarray, params) -> Var:
        T = s.shape[0]
        E = params[self.emb_key]
        pe = sinusoidal_table(T + 1, self.d_embed, self.L)
        items = E[np.concatenate([[self.placeholder], s[:-1]]).astype(int)] + pe[:T]
        queries = E[np.full(T, self.placeholder)] + pe[1:]
        mask = causal_mask(T + 1)[1:, :T]
        rope = (np.arange(1, T + 1), np.arange(T), self.L) if self.rope else None
        H = self.core(items, params, mask=mask, queries=queries, rope=rope)
        return self.head(H, params)


def _seq_log_prob_var(seq, model: ArModel, params) -> Var | float:
    s = model.check_symbols(seq)
    if s.shape[0] == 0:
        return 0.0
    lp = ops.log_softmax(model.logits(s, params), axis=1)
    return ops.sum(lp[np.arange(s.shape[0]), s])


def ar_conditionals(seq, model: ArModel, store: ParamStore) -> np.ndarray:
    """(T, C) array of p(x_i = · | x_<i)."""
    t = Tape()
    lg = model.logits(seq, store.to_vars(t)).value
    lg = lg - lg.max(axis=1, keepdims=True)
    p = np.exp(lg)
    return p / p.sum(axis=1, keepdims=True)


def ar_log_prob(seq, model: ArModel, store: ParamStore) -> float:
    """Σ_i log p(x_i | x_<i); 0 for the empty sequence."""
    s = model.check_symbols(seq)
    if s.shape[0] == 0:
        return 0.0
    t = Tape()
    return float(_seq_log_prob_var(s, model, store.to_vars(t)).item())


def ar_nll_var(batch, model: ArModel, params) -> Var:
    """Mean over sequences of the summed negative log-probability."""
    batch = [model.check_symbols(s) for s in batch]
    if not batch:
        raise ValueError("empty batch")
    tape = next(iter(params.values())).tape
    by_len: dict[int, list] = {}
    for s in batch:
        by_len.setdefault(s.shape[0], []).append(s)
    total = tape.const(0.0)
    for T, group in by_len.items():
        if T == 0:
            continue
        S = np.stack(group)
        lp = ops.log_softmax(model.batch_logits(S, params), axis=2)
        B = S.shape[0]
        idx = (np.repeat(np.arange(B), T), np.tile(np.arange(T), B), S.ravel())
        total = total + ops.sum(lp[idx])
    return -total * (1.0 / len(batch))


def ar_train_step(batch, model: ArModel, store: ParamStore, optimizer) -> float:
    """One optimiser step on the mean NLL; returns the NLL before the step."""
    tape = Tape()
    pv = store.to_vars(tape)
    loss = ar_nll_var(batch, model, pv)
    g = tape.backward(loss)
    store.collect_grads(tape, g, pv)
    optimizer.step(store)
    return loss.item()


def ar_sample(model: ArModel, store: ParamStore, T: int, rng, n: int | None = None) -> np.ndarray:
    """Ancestral sampling. Returns a length-T sequence, or (n, T) when n is given."""
    if T < 1:
        raise ValueError("sample length must be at least 1")
    m = 1 if n is None else int(n)
    t = Tape()
    params = store.to_vars(t)
    out = np.zeros((m, T), dtype=int)
    if model.backbone == "gru":
        E = params[model.emb_key].value
        h = model.core.initial_state(params, batch=m)
        prev = np.full(m, model.placeholder)
        for i in range(T):
            h = gru_step(t.const(E[prev]), h, model.core, params)
            out[:, i] = _draw(model.head(h, params).value, rng)
            prev = out[:, i]
            t = Tape()
            params = store.to_vars(t)
            h = t.const(h.value)
    else:
        for r in range(m):
            for i in range(T):
                prefix = np.concatenate([out[r, :i], [0]])
                lg = model.logits(prefix, params).value[-1]
                out[r, i] = _draw(lg[None, :], rng)[0]
    return out[0] if n is None else out


def _draw(logits: np.ndarray, rng) -> np.ndarray:
    lg = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(lg)
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random((p.shape[0], 1))
    return np.minimum((np.cumsum(p, axis=1) < u).sum(axis=1), p.shape[1] - 1)
