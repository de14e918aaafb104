"""Atomic measures on the sampling domain and the L2 space they induce."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_ids = itertools.count()


class MeasureMismatch(ValueError):
    """Raised when two vectors live on different measures."""


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Finite atomic measure ``sum_j w_j delta_{t_j}``.

    Instances are immutable. Vectors built on a measure carry a reference to
    it, and identity is used to check that two vectors are compatible.
    """

    points: np.ndarray
    weights: np.ndarray
    label: str = ""
    token: int = field(default_factory=lambda: next(_ids))

    def __post_init__(self):
        pts = _frozen(self.points).reshape(-1)
        w = _frozen(self.weights).reshape(-1)
        if pts.size == 0:
            raise ValueError("measure needs at least one point")
        if pts.shape != w.shape:
            raise ValueError("points and weights differ in length")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("non-finite point or weight")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.points.size

    @classmethod
    def uniform(cls, a: float, b: float, n: int, label: str = "") -> "GridMeasure":
        """Grid ``t_j = a + j*(b-a)/n``, j = 1..n, each carrying weight ``(b-a)/n``."""
        step = (b - a) / n
        pts = a + step * np.arange(1, n + 1)
        return cls(pts, np.full(n, step), label=label)

    @classmethod
    def counting(cls, points, label: str = "") -> "GridMeasure":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.ones_like(pts), label=label)

    def vector(self, values) -> "HilbertVector":
        return HilbertVector(values, self)

    def sample(self, fn) -> "HilbertVector":
        return HilbertVector(fn(self.points), self)

    def to_table(self, path) -> None:
        np.savetxt(path, np.column_stack([self.points, self.weights]), fmt="%.17g",
                   header=self.label)

    @classmethod
    def from_table(cls, path) -> "GridMeasure":
        path = Path(path)
        label = ""
        first = path.read_text().splitlines()[:1]
        if first and first[0].startswith("#"):
            label = first[0][1:].strip()
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] != 2:
            raise ValueError("expected a two-column table")
        return cls(data[:, 0], data[:, 1], label=label)

    def __repr__(self):
        return f"GridMeasure(n={self.size}, label={self.label!r})"


class HilbertVector:
    """Element of L2 of a ``GridMeasure``, stored as values at its points."""

    __slots__ = ("values", "measure")

    def __init__(self, values, measure: GridMeasure):
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.size != measure.size:
            raise ValueError("value count does not match the measure")
        self.values = v
        self.measure = measure

    def _check(self, other: "HilbertVector"):
        if other.measure is not self.measure:
            raise MeasureMismatch("vectors are defined on different measures")

    def inner(self, other: "HilbertVector") -> float:
        self._check(other)
        return inner(self.values, other.values, self.measure.weights)

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def __add__(self, other):
        self._check(other)
        return HilbertVector(self.values + other.values, self.measure)

    def __sub__(self, other):
        self._check(other)
        return HilbertVector(self.values - other.values, self.measure)

    def __mul__(self, c: float):
        return HilbertVector(self.values * float(c), self.measure)

    __rmul__ = __mul__

    def __neg__(self):
        return HilbertVector(-self.values, self.measure)

    def __repr__(self):
        return f"HilbertVector(n={self.values.size})"


def inner(f: np.ndarray, g: np.ndarray, w: np.ndarray) -> float:
    # np.sum reduces with pairwise summation, which keeps the error O(log n * eps)
    return float(np.sum(w * f * g))
