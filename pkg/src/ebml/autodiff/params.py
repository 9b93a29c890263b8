"""Named parameter storage with gradient and optimizer-state slots."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .tape import Tape, Var
from .tensor import ShapeError, check_array


@dataclass
class ParamEntry:
    value: np.ndarray
    grad: np.ndarray
    slots: dict[str, np.ndarray] = field(default_factory=dict)


class ParamStore:
    """Ordered map ``name -> (value, grad, optimizer slots)``.

    Insertion order is preserved so that checkpoints and flattened views are
    deterministic.
    """

    def __init__(self):
        self._entries: dict[str, ParamEntry] = {}

    # construction ---------------------------------------------------------
    def add(self, name: str, value) -> np.ndarray:
        if name in self._entries:
            raise KeyError(f"parameter '{name}' already exists")
        arr = check_array(value, what=f"parameter '{name}'").copy()
        self._entries[name] = ParamEntry(arr, np.zeros_like(arr))
        return arr

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def entry(self, name: str) -> ParamEntry:
        return self._entries[name]

    def value(self, name: str) -> np.ndarray:
        return self._entries[name].value

    def grad(self, name: str) -> np.ndarray:
        return self._entries[name].grad

    def slots(self, name: str) -> dict[str, np.ndarray]:
        return self._entries[name].slots

    def set_value(self, name: str, value) -> None:
        e = self._entries[name]
        arr = check_array(value, what=f"parameter '{name}'")
        if arr.shape != e.value.shape:
            raise ShapeError(f"parameter '{name}': new shape {arr.shape} != {e.value.shape}")
        e.value = arr.copy()

    def set_grad(self, name: str, grad) -> None:
        e = self._entries[name]
        g = np.asarray(grad, dtype=np.float64)
        if g.shape != e.value.shape:
            raise ShapeError(f"gradient for '{name}': shape {g.shape} != {e.value.shape}")
        e.grad = g.copy()

    def zero_grad(self) -> None:
        for e in self._entries.values():
            e.grad = np.zeros_like(e.value)

    def items(self):
        return ((k, e.value) for k, e in self._entries.items())

    # tape bridging ---------------------------------------------------------
    def to_vars(self, tape: Tape, names=None) -> dict[str, Var]:
        names = self.names() if names is None else names
        return {n: tape.leaf(self._entries[n].value, name=n) for n in names}

    def collect_grads(self, tape: Tape, grads: dict[int, np.ndarray], pvars: dict[str, Var],
                      accumulate: bool = False) -> None:
        for n, v in pvars.items():
            g = tape.grad(grads, v)
            if accumulate:
                self._entries[n].grad = self._entries[n].grad + g
            else:
                self._entries[n].grad = g.copy()

    # misc -------------------------------------------------------------------
    def copy(self, with_slots: bool = True) -> "ParamStore":
        out = ParamStore()
        for k, e in self._entries.items():
            out._entries[k] = ParamEntry(
                e.value.copy(), e.grad.copy(),
                {s: v.copy() for s, v in e.slots.items()} if with_slots else {})
        return out

    def view(self, names) -> "ParamStore":
        """A store sharing the chosen entries, so updates through it land here."""
        out = ParamStore()
        for n in names:
            out._entries[n] = self._entries[n]
        return out

    def values_dict(self) -> dict[str, np.ndarray]:
        return {k: e.value.copy() for k, e in self._entries.items()}

    def flat(self) -> np.ndarray:
        if not self._entries:
            return np.zeros(0)
        return np.concatenate([e.value.ravel() for e in self._entries.values()])

    def grad_flat(self) -> np.ndarray:
        if not self._entries:
            return np.zeros(0)
        return np.concatenate([e.grad.ravel() for e in self._entries.values()])

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: {e.value.shape}" for k, e in self._entries.items())
        return f"ParamStore({inner})"
