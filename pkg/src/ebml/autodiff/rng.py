"""Seeded random streams with named derivation."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, name: str) -> int:
    """64-bit seed from a hash of the parent seed and a stream name."""
    h = hashlib.blake2b(f"{int(seed)}:{name}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "little")


class RngStream:
    """A numpy ``Generator`` plus a call counter.

    Identical seed and identical call sequence give identical outputs. The
    stream forwards generator methods (``normal``, ``integers`` ...), so it
    can be passed wherever a ``numpy.random.Generator`` is expected.
    """

    def __init__(self, seed: int, name: str = "root"):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.name = name
        self.counter = 0
        self.gen = np.random.default_rng(self.seed)

    def derive(self, name: str) -> "RngStream":
        return RngStream(derive_seed(self.seed, name), name=f"{self.name}/{name}")

    def __getattr__(self, attr):
        target = getattr(self.gen, attr)
        if not callable(target):
            return target

        def call(*args, **kwargs):
            self.counter += 1
            return target(*args, **kwargs)

        return call

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, name={self.name!r}, counter={self.counter})"


def as_rng(rng) -> "RngStream | np.random.Generator":
    """Accept an int seed, RngStream or Generator."""
    if rng is None:
        raise ValueError("an explicit rng or seed is required")
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    return rng
