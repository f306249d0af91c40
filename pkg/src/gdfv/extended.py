"""Extended reals and lexicographic triples.

Log-space values live in R U {-inf}; they are plain Python floats (or float64
arrays) where ``float("-inf")`` is the absorbing element. NaN and +inf are
rejected at the boundaries.

A :class:`Triple` ``<k, x, j>`` stands for ``k * inf + x`` with a tie-breaking
tag ``j``. Triples add componentwise and compare lexicographically, which
removes both -inf and argmax ties from the dominance reduction used by the
max-plus engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEG_INF = float("-inf")


def extended(x) -> float:
    """Validate ``x`` as an element of R U {-inf} and return it as a float."""
    v = float(x)
    if math.isnan(v):
        raise ValueError("NaN is not an extended real")
    if v == math.inf:
        raise ValueError("+inf is not an extended real")
    return v


def ext_add(a: float, b: float) -> float:
    a, b = extended(a), extended(b)
    if a == NEG_INF or b == NEG_INF:
        return NEG_INF
    return a + b


def check_extended_array(a, name: str = "array") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if np.isnan(arr).any():
        raise ValueError(f"{name} contains NaN")
    if np.isposinf(arr).any():
        raise ValueError(f"{name} contains +inf")
    return arr


@dataclass(frozen=True, order=True)
class Triple:
    inf_count: int
    value: float
    tag: int

    def __post_init__(self):
        if math.isnan(self.value) or math.isinf(self.value):
            raise ValueError(f"triple value must be finite, got {self.value}")

    def __add__(self, other: Triple) -> Triple:
        return Triple(self.inf_count + other.inf_count, self.value + other.value, self.tag + other.tag)

    def __sub__(self, other: Triple) -> Triple:
        return Triple(self.inf_count - other.inf_count, self.value - other.value, self.tag - other.tag)

    def as_tuple(self) -> tuple[int, float, int]:
        return (self.inf_count, self.value, self.tag)


ZERO = Triple(0, 0.0, 0)


def triple_add(a: Triple, b: Triple) -> Triple:
    return a + b


def triple_compare(a: Triple, b: Triple) -> int:
    """Three-way lexicographic comparison: -1, 0 or 1."""
    ta, tb = a.as_tuple(), b.as_tuple()
    return (ta > tb) - (ta < tb)


def lift_matrix_entry(x) -> Triple:
    x = extended(x)
    if x == NEG_INF:
        return Triple(-1, 0.0, 0)
    return Triple(0, x, 0)


def lift_vector_entry(x, j: int) -> Triple:
    """Lift ``b[j]``; the tag ``j`` must be at least 1 (0 marks matrix entries)."""
    if j < 1:
        raise ValueError(f"vector tag must be >= 1, got {j}")
    x = extended(x)
    if x == NEG_INF:
        return Triple(-1, 0.0, j)
    return Triple(0, x, j)


def lower(t: Triple) -> tuple[float, int]:
    """Map a product triple back to ``(value, column_tag)``."""
    if t.tag == 0:
        raise ValueError("tag 0 does not come from a matrix-vector product")
    if t.inf_count == 0:
        return t.value, t.tag
    return NEG_INF, t.tag


def lift_array(a) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized lift: returns ``(inf_count, value)`` arrays; tags are left to the caller."""
    arr = check_extended_array(a)
    neg = np.isneginf(arr)
    return np.where(neg, -1, 0).astype(np.int32), np.where(neg, 0.0, arr)


def lower_array(inf_count: np.ndarray, value: np.ndarray) -> np.ndarray:
    return np.where(inf_count == 0, value, NEG_INF)
