"""Position information for attention: additive sinusoids and pairwise rotations."""

from __future__ import annotations

import numpy as np

from ..autodiff import ShapeError, Var, ops

DEFAULT_L = 10000.0


def sinusoidal_pe(i: float, dim: int, L: float = DEFAULT_L) -> np.ndarray:
    """Entry d is sin(i / L^(d/dim)) for even d and cos(i / L^((d-1)/dim)) for odd d."""
    if dim % 2 != 0:
        raise ShapeError(f"sinusoidal_pe: dimension must be even, got {dim}")
    if not L > 0:
        raise ValueError("sinusoidal_pe: L must be positive")
    d = np.arange(dim)
    even = d % 2 == 0
    expo = np.where(even, d, d - 1) / dim
    arg = i / np.power(L, expo)
    return np.where(even, np.sin(arg), np.cos(arg))


def sinusoidal_table(n: int, dim: int, L: float = DEFAULT_L, start: int = 0) -> np.ndarray:
    return np.stack([sinusoidal_pe(start + i, dim, L) for i in range(n)])


def rope_angles(m: float, dim: int, L: float = DEFAULT_L) -> np.ndarray:
    """Rotation angle m * L^(k/dim) for pair k = 1 .. dim/2."""
    if dim % 2 != 0:
        raise ShapeError(f"rope: dimension must be even, got {dim}")
    k = np.arange(1, dim // 2 + 1)
    return m * np.power(L, k / dim)


def rope_matrix(m: float, dim: int, L: float = DEFAULT_L) -> np.ndarray:
    """Block-diagonal matrix of 2-D rotations."""
    R = np.zeros((dim, dim))
    for k, a in enumerate(rope_angles(m, dim, L)):
        c, s = np.cos(a), np.sin(a)
        R[2 * k:2 * k + 2, 2 * k:2 * k + 2] = [[c, -s], [s, c]]
    return R


def rope_rotate(v, m: float, L: float = DEFAULT_L) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] % 2 != 0:
        raise ShapeError(f"rope_rotate: needs an even-length vector, got shape {v.shape}")
    ang = rope_angles(m, v.shape[0], L)
    c, s = np.cos(ang), np.sin(ang)
    a, b = v[0::2], v[1::2]
    out = np.empty_like(v)
    out[0::2] = c * a - s * b
    out[1::2] = s * a + c * b
    return out


def rope_rows(X: Var, positions, L: float = DEFAULT_L) -> Var:
    """Rotate row i of X by R_{positions[i]} on the tape.

    Written as X * C + (X @ P) * S, where P swaps each pair with a sign flip,
    so the rotation stays differentiable through plain primitives.
    """
    n, dim = X.shape
    if dim % 2 != 0:
        raise ShapeError(f"rope_rows: dimension must be even, got {dim}")
    ang = np.stack([np.repeat(rope_angles(p, dim, L), 2) for p in positions])
    P = np.zeros((dim, dim))
    for k in range(dim // 2):
        P[2 * k + 1, 2 * k] = -1.0
        P[2 * k, 2 * k + 1] = 1.0
    return X * np.cos(ang) + ops.matmul(X, P) * np.sin(ang)
