"""Dynamic tape for reverse-mode differentiation.

Every primitive appends one node holding its forward value, the ids of its
inputs, a forward closure (used by :meth:`Tape.replay`) and a vector-Jacobian
closure. Nodes only ever reference earlier nodes, so the tape is acyclic by
construction and the reverse sweep is a single pass over the node list.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import MAX_RANK, NonFiniteError, ShapeError, Tensor, all_finite, check_array


class ContractError(RuntimeError):
    """Raised when a caller violates an API precondition."""


@dataclass(slots=True)
class Node:
    op: str
    inputs: tuple[int, ...]
    value: np.ndarray
    fwd: Callable | None
    vjp: Callable | None
    requires_grad: bool
    name: str | None = None


class Tape:
    """Append-only record of primitive operations."""

    def __init__(self):
        self.nodes: list[Node] = []
        # name -> var maps filled in by ``forward``
        self.inputs: dict = {}
        self.params: dict = {}

    @property
    def next_id(self) -> int:
        return len(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    # leaves ---------------------------------------------------------------
    def leaf(self, value, name: str | None = None, requires_grad: bool = True) -> "Var":
        if isinstance(value, Tensor):
            value = value.data
        arr = check_array(value, what=f"leaf {name or self.next_id}").copy()
        self.nodes.append(Node("leaf", (), arr, None, None, requires_grad, name))
        return Var(self, len(self.nodes) - 1)

    def const(self, value, name: str | None = None) -> "Var":
        return self.leaf(value, name=name, requires_grad=False)

    def record(self, op: str, inputs: Sequence["Var"], value: np.ndarray,
               fwd: Callable, vjp: Callable) -> "Var":
        nodes = self.nodes
        req = False
        for v in inputs:
            if v.tape is not self:
                raise ContractError(f"op '{op}': inputs belong to different tapes")
            if not req and nodes[v.id].requires_grad:
                req = True
        if type(value) is not np.ndarray or value.dtype != np.float64:
            value = np.asarray(value, dtype=np.float64)
        if value.ndim > MAX_RANK:
            raise ShapeError(f"op '{op}': output rank {value.ndim} exceeds {MAX_RANK}")
        if not all_finite(value):
            raise NonFiniteError(f"op '{op}' (node {self.next_id}) produced non-finite values")
        self.nodes.append(Node(op, tuple(v.id for v in inputs), value, fwd, vjp, req))
        return Var(self, len(self.nodes) - 1)

    # reverse sweep --------------------------------------------------------
    def backward(self, output: "Var", seed: float = 1.0) -> dict[int, np.ndarray]:
        """Gradients of a scalar ``output`` with respect to every node.

        Nodes that do not influence the output (or do not require gradients)
        are absent from the returned map; :meth:`grad` fills them with zeros.
        """
        if output.tape is not self:
            raise ContractError("backward: output node belongs to a different tape")
        out_val = self.nodes[output.id].value
        if out_val.size != 1:
            raise ContractError(
                f"backward: output must be scalar-valued, got shape {out_val.shape}")
        grads: dict[int, np.ndarray] = {output.id: np.full(out_val.shape, float(seed))}
        for idx in range(output.id, -1, -1):
            g = grads.get(idx)
            if g is None:
                continue
            node = self.nodes[idx]
            if node.vjp is None or not node.requires_grad:
                continue
            in_vals = [self.nodes[i].value for i in node.inputs]
            in_grads = node.vjp(g, in_vals, node.value)
            for i, gi in zip(node.inputs, in_grads):
                if gi is None or not self.nodes[i].requires_grad:
                    continue
                if gi.shape != self.nodes[i].value.shape:
                    raise ShapeError(
                        f"op '{node.op}': gradient shape {gi.shape} does not match "
                        f"input shape {self.nodes[i].value.shape}")
                if i in grads:
                    grads[i] = grads[i] + gi
                else:
                    grads[i] = gi
        return grads

    def grad(self, grads: dict[int, np.ndarray], var: "Var") -> np.ndarray:
        g = grads.get(var.id)
        if g is None:
            return np.zeros_like(self.nodes[var.id].value)
        return g

    def replay(self, leaf_values: dict[int, np.ndarray] | None = None) -> np.ndarray:
        """Re-evaluate every node from the leaves; returns the last node's value.

        ``leaf_values`` optionally substitutes new values for given leaf ids.
        """
        values: list[np.ndarray] = []
        for i, node in enumerate(self.nodes):
            if node.fwd is None:
                v = node.value
                if leaf_values and i in leaf_values:
                    v = np.asarray(leaf_values[i], dtype=np.float64)
                values.append(v)
            else:
                values.append(np.asarray(node.fwd(*[values[j] for j in node.inputs])))
        return values[-1]


def _const_like(tape: Tape, x) -> "Var":
    if isinstance(x, Var):
        return x
    return tape.const(np.asarray(x, dtype=np.float64))


class Var:
    """Handle to a node on a tape, with arithmetic operator overloads."""

    __slots__ = ("tape", "id")
    # make numpy defer to the reflected operators defined here
    __array_ufunc__ = None

    def __init__(self, tape: Tape, idx: int):
        self.tape = tape
        self.id = idx

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.id].value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.tape.nodes[self.id].value.shape

    @property
    def ndim(self) -> int:
        return self.tape.nodes[self.id].value.ndim

    @property
    def tensor(self) -> Tensor:
        return Tensor(self.value)

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Var(id={self.id}, op={self.tape.nodes[self.id].op}, shape={self.shape})"

    def __add__(self, o):
        return ops.add(self, _const_like(self.tape, o))

    def __radd__(self, o):
        return ops.add(_const_like(self.tape, o), self)

    def __sub__(self, o):
        return ops.sub(self, _const_like(self.tape, o))

    def __rsub__(self, o):
        return ops.sub(_const_like(self.tape, o), self)

    def __mul__(self, o):
        return ops.mul(self, _const_like(self.tape, o))

    def __rmul__(self, o):
        return ops.mul(_const_like(self.tape, o), self)

    def __truediv__(self, o):
        return ops.div(self, _const_like(self.tape, o))

    def __rtruediv__(self, o):
        return ops.div(_const_like(self.tape, o), self)

    def __neg__(self):
        return ops.neg(self)

    def __matmul__(self, o):
        return ops.matmul(self, _const_like(self.tape, o))

    def __rmatmul__(self, o):
        return ops.matmul(_const_like(self.tape, o), self)

    def __pow__(self, p):
        return ops.power(self, float(p))

    def __getitem__(self, idx):
        return ops.getitem(self, idx)

    @property
    def T(self):
        return ops.transpose(self)

    def sum(self, axis=None):
        return ops.sum(self, axis)

    def mean(self, axis=None):
        return ops.mean(self, axis)


from . import ops  # noqa: E402  (circular: ops builds on Var)
