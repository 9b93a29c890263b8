"""Differentiable primitives recorded on a :class:`~ebml.autodiff.tape.Tape`.

Broadcasting is deliberately narrow: two operands must have equal shapes,
or one of them is a scalar, or the shape of one is a trailing suffix of the
other (the bias-add pattern ``(N, d) + (d,)``).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tape import ContractError, Var
from .tensor import ShapeError


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise ContractError("at least one operand must be a tape variable")


def _lift(tape, x) -> Var:
    if isinstance(x, Var):
        return x
    return tape.const(np.asarray(x, dtype=np.float64))


def _broadcast_shape(sa, sb, op):
    if sa == sb:
        return sa
    if len(sa) == 0 or sa == (1,) * len(sa) and len(sa) <= len(sb) and np.prod(sa) == 1:
        return sb
    if len(sb) == 0 or sb == (1,) * len(sb) and len(sb) <= len(sa) and np.prod(sb) == 1:
        return sa
    if len(sb) < len(sa) and sa[len(sa) - len(sb):] == sb:
        return sa
    if len(sa) < len(sb) and sb[len(sb) - len(sa):] == sa:
        return sb
    raise ShapeError(f"op '{op}': shapes {sa} and {sb} are not broadcast-compatible "
                     "(only equal, scalar or trailing-suffix shapes are allowed)")


def _unbroadcast(g, shape):
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


# elementwise binary --------------------------------------------------------

def add(a, b) -> Var:
    t = _tape_of(a, b)
    a, b = _lift(t, a), _lift(t, b)
    _broadcast_shape(a.shape, b.shape, "add")
    sa, sb = a.shape, b.shape
    return t.record("add", [a, b], a.value + b.value, np.add,
                    lambda g, iv, out: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Var:
    t = _tape_of(a, b)
    a, b = _lift(t, a), _lift(t, b)
    _broadcast_shape(a.shape, b.shape, "sub")
    sa, sb = a.shape, b.shape
    return t.record("sub", [a, b], a.value - b.value, np.subtract,
                    lambda g, iv, out: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Var:
    t = _tape_of(a, b)
    a, b = _lift(t, a), _lift(t, b)
    _broadcast_shape(a.shape, b.shape, "mul")
    sa, sb = a.shape, b.shape
    return t.record("mul", [a, b], a.value * b.value, np.multiply,
                    lambda g, iv, out: (_unbroadcast(g * iv[1], sa),
                                        _unbroadcast(g * iv[0], sb)))


def div(a, b) -> Var:
    t = _tape_of(a, b)
    a, b = _lift(t, a), _lift(t, b)
    _broadcast_shape(a.shape, b.shape, "div")
    sa, sb = a.shape, b.shape
    return t.record("div", [a, b], a.value / b.value, np.divide,
                    lambda g, iv, out: (_unbroadcast(g / iv[1], sa),
                                        _unbroadcast(-g * out / iv[1], sb)))


# elementwise unary ---------------------------------------------------------

def _unary(name, x: Var, f, dfdx):
    """``dfdx(x, out)`` returns the elementwise derivative."""
    return x.tape.record(name, [x], f(x.value), f,
                         lambda g, iv, out: (g * dfdx(iv[0], out),))


def neg(x: Var) -> Var:
    return _unary("neg", x, np.negative, lambda x, o: -np.ones_like(x))


def identity(x: Var) -> Var:
    return _unary("identity", x, lambda v: v.copy(), lambda x, o: np.ones_like(x))


def exp(x: Var) -> Var:
    return _unary("exp", x, np.exp, lambda x, o: o)


def log(x: Var) -> Var:
    with np.errstate(divide="ignore", invalid="ignore"):
        return _unary("log", x, np.log, lambda x, o: 1.0 / x)


def sqrt(x: Var) -> Var:
    with np.errstate(invalid="ignore"):
        return _unary("sqrt", x, np.sqrt, lambda x, o: 0.5 / o)


def square(x: Var) -> Var:
    return _unary("square", x, np.square, lambda x, o: 2.0 * x)


def power(x: Var, p: float) -> Var:
    with np.errstate(divide="ignore", invalid="ignore"):
        return _unary("power", x, lambda v: np.power(v, p),
                      lambda x, o: p * np.power(x, p - 1.0))


def tanh(x: Var) -> Var:
    return _unary("tanh", x, np.tanh, lambda x, o: 1.0 - o * o)


def stable_sigmoid(v: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x: Var) -> Var:
    return _unary("sigmoid", x, stable_sigmoid, lambda x, o: o * (1.0 - o))


def relu(x: Var) -> Var:
    return _unary("relu", x, lambda v: np.maximum(v, 0.0),
                  lambda x, o: (x > 0).astype(np.float64))


def softplus(x: Var) -> Var:
    return _unary("softplus", x, lambda v: np.logaddexp(0.0, v),
                  lambda x, o: stable_sigmoid(x))


def absolute(x: Var) -> Var:
    return _unary("abs", x, np.abs, lambda x, o: np.sign(x))


# linear algebra and shape ---------------------------------------------------

def matmul(a, b) -> Var:
    t = _tape_of(a, b)
    a, b = _lift(t, a), _lift(t, b)
    if a.ndim > 2 or b.ndim > 2 or a.ndim == 0 or b.ndim == 0:
        raise ShapeError(f"op 'matmul': operands must be rank 1 or 2, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"op 'matmul': inner dimensions differ, {a.shape} @ {b.shape}")
    na, nb = a.ndim, b.ndim

    def vjp(g, iv, out):
        av, bv = iv
        if na == 2 and nb == 2:
            return g @ bv.T, av.T @ g
        if na == 2 and nb == 1:
            return np.outer(g, bv), av.T @ g
        if na == 1 and nb == 2:
            return bv @ g, np.outer(av, g)
        return g * bv, g * av

    return t.record("matmul", [a, b], a.value @ b.value, np.matmul, vjp)


def transpose(x: Var) -> Var:
    if x.ndim != 2:
        raise ShapeError(f"op 'transpose': expects a matrix, got shape {x.shape}")
    return x.tape.record("transpose", [x], x.value.T.copy(), lambda v: v.T.copy(),
                         lambda g, iv, out: (g.T,))


def reshape(x: Var, shape) -> Var:
    shape = tuple(shape)
    src = x.shape
    try:
        val = x.value.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"op 'reshape': cannot reshape {src} to {shape}") from exc
    return x.tape.record("reshape", [x], val.copy(), lambda v: v.reshape(shape),
                         lambda g, iv, out: (g.reshape(src),))


def sum(x: Var, axis=None) -> Var:  # noqa: A001 - mirrors numpy naming
    src = x.shape

    def vjp(g, iv, out):
        if axis is None:
            return (np.broadcast_to(g, src).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), src).copy(),)

    return x.tape.record("sum", [x], np.sum(x.value, axis=axis),
                         lambda v: np.sum(v, axis=axis), vjp)


def mean(x: Var, axis=None) -> Var:
    n = x.value.size if axis is None else x.shape[axis]
    return mul(sum(x, axis), 1.0 / n)


def getitem(x: Var, idx) -> Var:
    src = x.shape
    if isinstance(idx, list):
        idx = np.asarray(idx)
    val = x.value[idx]

    def vjp(g, iv, out):
        full = np.zeros(src)
        np.add.at(full, idx, g)
        return (full,)

    return x.tape.record("getitem", [x], np.array(val, dtype=np.float64),
                         lambda v: v[idx], vjp)


def concat(xs: Sequence[Var], axis: int = 0) -> Var:
    t = _tape_of(*xs)
    xs = [_lift(t, x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    try:
        val = np.concatenate([x.value for x in xs], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"op 'concat': incompatible shapes {[x.shape for x in xs]}") from exc
    splits = np.cumsum(sizes)[:-1]

    def vjp(g, iv, out):
        return tuple(np.split(g, splits, axis=axis))

    return t.record("concat", xs, val, lambda *vs: np.concatenate(vs, axis=axis), vjp)


def stack(xs: Sequence[Var], axis: int = 0) -> Var:
    t = _tape_of(*xs)
    xs = [_lift(t, x) for x in xs]
    try:
        val = np.stack([x.value for x in xs], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"op 'stack': incompatible shapes {[x.shape for x in xs]}") from exc
    n = len(xs)

    def vjp(g, iv, out):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return t.record("stack", xs, val, lambda *vs: np.stack(vs, axis=axis), vjp)


# reductions with numerical care --------------------------------------------

def _lse(v, axis):
    m = np.max(v, axis=axis, keepdims=True)
    s = np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True)) + m
    return s if axis is None else np.squeeze(s, axis=axis)


def logsumexp(x: Var, axis=None) -> Var:
    """log Σ exp(x) with max subtraction."""
    def f(v):
        out = _lse(v, axis)
        return out.reshape(()) if axis is None else out

    src = x.shape

    def vjp(g, iv, out):
        o = out if axis is None else np.expand_dims(out, axis)
        gg = g if axis is None else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, src) * np.exp(iv[0] - o),)

    return x.tape.record("logsumexp", [x], f(x.value), f, vjp)


def log_softmax(x: Var, axis: int = -1) -> Var:
    def f(v):
        return v - np.expand_dims(_lse(v, axis), axis)

    def vjp(g, iv, out):
        p = np.exp(out)
        return (g - p * np.sum(g, axis=axis, keepdims=True),)

    return x.tape.record("log_softmax", [x], f(x.value), f, vjp)


def softmax(x: Var, axis: int = -1) -> Var:
    def f(v):
        e = np.exp(v - np.max(v, axis=axis, keepdims=True))
        return e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g, iv, out):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return x.tape.record("softmax", [x], f(x.value), f, vjp)


def masked_softmax(x: Var, keep: np.ndarray, axis: int = -1) -> Var:
    """Softmax over entries where ``keep`` is true; masked entries are exactly 0.

    A slice along ``axis`` with no kept entry is an error.
    """
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != x.shape:
        raise ShapeError(f"op 'masked_softmax': mask shape {keep.shape} != scores {x.shape}")
    if not np.all(np.any(keep, axis=axis)):
        raise ContractError("op 'masked_softmax': a fully masked row has no entry to attend to")

    def f(v):
        vv = np.where(keep, v, -np.inf)
        m = np.max(vv, axis=axis, keepdims=True)
        e = np.where(keep, np.exp(np.where(keep, v, 0.0) - m), 0.0)
        return e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g, iv, out):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return x.tape.record("masked_softmax", [x], f(x.value), f, vjp)


def maximum_const(x: Var, c: float) -> Var:
    """max(x, c) for a constant c; subgradient 0 at ties."""
    return _unary("maximum", x, lambda v: np.maximum(v, c),
                  lambda x, o: (x > c).astype(np.float64))


ACTIVATIONS = {
    "identity": identity,
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
}


def activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation '{name}'; choose from {sorted(ACTIVATIONS)}") from None
