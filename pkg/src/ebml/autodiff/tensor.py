"""Dense float64 tensors of rank at most 3, validated at construction."""

from __future__ import annotations

import math

import numpy as np

MAX_RANK = 3
_sum = np.add.reduce


class ShapeError(ValueError):
    """Raised when an operation receives incompatible shapes."""


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or infinite value would enter the computation."""


def all_finite(arr: np.ndarray) -> bool:
    """True when every entry is finite. A finite sum settles it in one pass."""
    if math.isfinite(_sum(arr, None)):
        return True
    return bool(np.isfinite(arr).all())


def check_array(data, what: str = "tensor", allow_empty: bool = False) -> np.ndarray:
    """Convert ``data`` to a float64 array and validate rank and finiteness."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim > MAX_RANK:
        raise ShapeError(f"{what}: rank {arr.ndim} exceeds the maximum of {MAX_RANK}")
    if not allow_empty and any(s == 0 for s in arr.shape):
        raise ShapeError(f"{what}: zero-sized extent in shape {arr.shape}")
    if not all_finite(arr):
        raise NonFiniteError(f"{what}: contains NaN or infinite values")
    return arr


class Tensor:
    """Row-major float64 array with shape metadata.

    NaN and infinite entries are rejected up front so that divergence shows
    up as an error at the point it happens instead of a silent NaN later.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        self.data = check_array(data).copy()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def tolist(self):
        return self.data.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={np.array2string(self.data, precision=4)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None
