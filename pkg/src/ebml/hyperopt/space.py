"""Hyperparameter spaces with an encoding to the unit cube."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class Dimension:
    name: str

    def sample(self, rng):
        raise NotImplementedError

    def encode(self, v) -> np.ndarray:
        raise NotImplementedError

    def neighbor(self, v, rng, scale: float):
        raise NotImplementedError

    def distance(self, a, b) -> float:
        return float(np.linalg.norm(self.encode(a) - self.encode(b)))


class Continuous(Dimension):
    def __init__(self, name: str, lo: float, hi: float, log: bool = False):
        if not lo < hi:
            raise ValueError(f"dimension '{name}': need lo < hi")
        if log and lo <= 0:
            raise ValueError(f"dimension '{name}': log scale needs lo > 0")
        self.name, self.lo, self.hi, self.log = name, float(lo), float(hi), log

    def _fwd(self, v):
        return math.log(v) if self.log else float(v)

    def _bounds(self):
        return self._fwd(self.lo), self._fwd(self.hi)

    def from_unit(self, u: float) -> float:
        a, b = self._bounds()
        t = a + float(np.clip(u, 0.0, 1.0)) * (b - a)
        # exp(log(hi)) can round past hi
        return float(min(max(math.exp(t), self.lo), self.hi)) if self.log else t

    def sample(self, rng):
        return self.from_unit(rng.random())

    def encode(self, v):
        a, b = self._bounds()
        return np.array([(self._fwd(v) - a) / (b - a)])

    def neighbor(self, v, rng, scale):
        return self.from_unit(self.encode(v)[0] + scale * rng.standard_normal())


class Integer(Dimension):
    def __init__(self, name: str, lo: int, hi: int):
        if not lo < hi:
            raise ValueError(f"dimension '{name}': need lo < hi")
        self.name, self.lo, self.hi = name, int(lo), int(hi)

    def from_unit(self, u):
        return int(round(self.lo + float(np.clip(u, 0.0, 1.0)) * (self.hi - self.lo)))

    def sample(self, rng):
        return int(rng.integers(self.lo, self.hi + 1))

    def encode(self, v):
        return np.array([(v - self.lo) / (self.hi - self.lo)])

    def neighbor(self, v, rng, scale):
        return self.from_unit(self.encode(v)[0] + scale * rng.standard_normal())


class Categorical(Dimension):
    def __init__(self, name: str, choices, keep_prob: float = 0.8):
        choices = list(choices)
        if not choices:
            raise ValueError(f"dimension '{name}': no choices")
        self.name, self.choices, self.keep_prob = name, choices, keep_prob

    def sample(self, rng):
        return self.choices[int(rng.integers(len(self.choices)))]

    def encode(self, v):
        e = np.zeros(len(self.choices))
        e[self.choices.index(v)] = 1.0
        return e

    def neighbor(self, v, rng, scale):
        return v if rng.random() < self.keep_prob else self.sample(rng)

    def distance(self, a, b):
        return 0.0 if a == b else 1.0


@dataclass
class HyperSpace:
    dims: list = field(default_factory=list)

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    def sample(self, rng) -> dict:
        return {d.name: d.sample(rng) for d in self.dims}

    def encode(self, point: dict) -> np.ndarray:
        if not self.dims:
            return np.zeros(0)
        return np.concatenate([d.encode(point[d.name]) for d in self.dims])

    @property
    def width(self) -> int:
        return sum(len(d.choices) if isinstance(d, Categorical) else 1 for d in self.dims)

    def distance(self, a: dict, b: dict) -> float:
        """Euclidean over numeric encodings; each categorical mismatch adds 1 to the squared sum."""
        return float(math.sqrt(sum(d.distance(a[d.name], b[d.name]) ** 2 for d in self.dims)))

    def neighbor(self, point: dict, rng, scale: float = 0.1) -> dict:
        return {d.name: d.neighbor(point[d.name], rng, scale) for d in self.dims}

    @classmethod
    def from_config(cls, spec) -> "HyperSpace":
        dims = []
        for s in spec:
            kind = s.get("type", "continuous")
            if kind == "continuous":
                dims.append(Continuous(s["name"], s["lo"], s["hi"], s.get("log", False)))
            elif kind == "integer":
                dims.append(Integer(s["name"], s["lo"], s["hi"]))
            elif kind == "categorical":
                dims.append(Categorical(s["name"], s["choices"]))
            else:
                raise ValueError(f"unknown dimension type {kind!r}")
        return cls(dims)


@dataclass
class TrialRecord:
    params: dict
    risk: float
    seed: int
    status: str = "ok"
    error: str = ""

    def __post_init__(self):
        if self.status == "ok" and not np.isfinite(self.risk):
            raise ValueError("a successful trial needs a finite risk")

    @property
    def ok(self) -> bool:
        return self.status == "ok"
