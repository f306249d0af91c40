"""Online dominance reporting.

Given a fixed set ``B`` of d-dimensional points, report every ``b`` in ``B``
with ``b[k] <= p[k]`` for all ``k``, for query vectors ``p`` that arrive one
at a time. Two preprocessed structures are offered:

* :class:`DominanceTree`, the divide-and-conquer tree: polynomial build,
  sublinear query work for fixed dimension.
* :class:`DominanceTable`, a lookup table over per-coordinate ranks: O(d log |B|)
  queries after an exponential ``(|B| + 1) ** d`` build.

Coordinates are lexicographic triples ``(inf, value, tag)``; plain real
coordinates are the case ``inf = tag = 0`` (see :meth:`PointSet.from_real`).
Queries return original row indices (0-based).
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._forest import (
    DEFAULT_MEM_BUDGET,
    Forest,
    MemoryBudgetError,
    build_forest,
    query_forest,
    tree_shape,
)

__all__ = [
    "PointSet",
    "QueryStats",
    "DominanceTree",
    "DominanceTable",
    "MemoryBudgetError",
    "build_tree",
    "query_tree",
    "build_table",
    "query_table",
    "dominated_by_scan",
    "report_all_dominating_pairs",
    "DEFAULT_TABLE_BUDGET",
]

DEFAULT_TABLE_BUDGET = 2**30


@dataclass(frozen=True)
class PointSet:
    """``n`` points of dimension ``d``; row ``i`` is point ``i``."""

    inf: np.ndarray
    val: np.ndarray
    tag: np.ndarray

    def __post_init__(self):
        if self.val.ndim != 2 or self.inf.shape != self.val.shape or self.tag.shape != self.val.shape:
            raise ValueError("point arrays must share one (n, d) shape")
        if np.isnan(self.val).any() or np.isinf(self.val).any():
            raise ValueError("point values must be finite")

    @classmethod
    def from_real(cls, coords) -> PointSet:
        val = np.asarray(coords, dtype=np.float64)
        if val.ndim == 1:
            val = val.reshape(-1, 1)
        zeros = np.zeros(val.shape, dtype=np.int32)
        return cls(zeros, val, zeros.copy())

    @classmethod
    def from_triples(cls, inf, val, tag) -> PointSet:
        return cls(np.asarray(inf, np.int32), np.asarray(val, np.float64), np.asarray(tag, np.int32))

    @property
    def n(self) -> int:
        return self.val.shape[0]

    @property
    def d(self) -> int:
        return self.val.shape[1]

    def key(self, i: int, k: int) -> tuple[int, float, int]:
        return (int(self.inf[i, k]), float(self.val[i, k]), int(self.tag[i, k]))


def _query_arrays(p, d: int):
    """Accept a real vector, a PointSet row-set of size 1, or an ``(inf, val, tag)`` tuple."""
    if isinstance(p, PointSet):
        if p.n != 1:
            raise ValueError("a query PointSet must hold exactly one point")
        q_inf, q_val, q_tag = p.inf[0], p.val[0], p.tag[0]
    elif isinstance(p, tuple) and len(p) == 3 and np.ndim(p[1]) == 1:
        q_inf, q_val, q_tag = (np.asarray(a) for a in p)
    else:
        q_val = np.asarray(p, dtype=np.float64).reshape(-1)
        q_inf = np.zeros(q_val.shape, np.int32)
        q_tag = np.zeros(q_val.shape, np.int32)
    if q_val.shape != (d,) or q_inf.shape != (d,) or q_tag.shape != (d,):
        raise ValueError(f"query dimension mismatch: expected {d}, got {q_val.shape[0]}")
    return q_inf, q_val, q_tag


@dataclass(frozen=True)
class QueryStats:
    visits: int
    leaf_checks: int
    output_size: int


@dataclass(frozen=True)
class DominanceTree:
    forest: Forest

    @property
    def d(self) -> int:
        return self.forest.d

    @property
    def n(self) -> int:
        return self.forest.n_points

    def node_counts(self) -> tuple[int, int]:
        """``(split_nodes, leaves)`` as materialized."""
        splits = int((self.forest.kind == 0).sum())
        return splits, self.forest.n_nodes - splits

    def height(self) -> int:
        f = self.forest
        best = 0
        stack = [(int(f.roots[0]), 0)]
        while stack:
            u, h = stack.pop()
            best = max(best, h)
            if f.kind[u] == 0:
                stack += [(int(f.minus[u]), h + 1), (int(f.plus[u]), h + 1), (int(f.proj[u]), h + 1)]
        return best

    def build_work(self) -> int:
        """Work units spent building: one per point per node (the U_d recurrence)."""
        return int(self.forest.size.sum(dtype=np.int64))


def build_tree(points: PointSet, mem_budget: int | None = DEFAULT_MEM_BUDGET) -> DominanceTree:
    if points.n < 1:
        raise ValueError("cannot build a dominance tree over an empty point set")
    f = build_forest(points.inf[None], points.val[None], points.tag[None], mem_budget=mem_budget)
    return DominanceTree(f)


def query_tree(tree: DominanceTree, p, *, with_stats: bool = False):
    """Rows of the tree's point set dominated by ``p``, as a sorted int array.

    With ``with_stats=True`` returns ``(rows, QueryStats)``.
    """
    q_inf, q_val, q_tag = _query_arrays(p, tree.d)
    rows, offsets, visits, checks = query_forest(
        tree.forest, np.zeros(1, np.int64), q_inf[None], q_val[None], q_tag[None])
    if with_stats:
        return rows, QueryStats(visits, checks, int(rows.size))
    return rows


def dominated_by_scan(points: PointSet, p) -> np.ndarray:
    """Exhaustive O(n d) reference for :func:`query_tree`."""
    q_inf, q_val, q_tag = _query_arrays(p, points.d)
    le = (points.inf < q_inf) | (
        (points.inf == q_inf) & ((points.val < q_val) | ((points.val == q_val) & (points.tag <= q_tag))))
    return np.flatnonzero(le.all(axis=1))


def tree_bounds(n: int, d: int) -> dict[str, float]:
    """Analytic bounds the built tree must respect."""
    h = math.ceil(math.log2(n)) if n > 1 else 0
    # at eps = log2(3/2): 2^(1+eps) = 3, so c' = 1 and n^(1+eps) = n * 1.5^log2(n), exact for powers of two
    c_prime = 1.0 / (2 * 1.5 - 2)
    return {
        "height": h,
        "nodes_per_kind": 3**h,
        "build_work": 3 * c_prime**d * n * 1.5 ** math.log2(n) - 2 * n,
        "query_visits": d * n,
    }


def report_all_dominating_pairs(red: PointSet, blue: PointSet) -> set[tuple[int, int]]:
    """All ``(red_row, blue_row)`` with blue point <= red point coordinatewise."""
    if red.d != blue.d:
        raise ValueError(f"dimension mismatch: red has {red.d}, blue has {blue.d}")
    if blue.n == 0 or red.n == 0:
        return set()
    tree = build_tree(blue)
    rows, offsets, _, _ = query_forest(
        tree.forest, np.zeros(red.n, np.int64), red.inf, red.val, red.tag)
    counts = np.diff(offsets)
    reds = np.repeat(np.arange(red.n), counts)
    return set(zip(reds.tolist(), rows.tolist()))


# ---------------------------------------------------------------------------
# lookup table


@dataclass(frozen=True)
class DominanceTable:
    """Precomputed answers for every rank tuple ``(r_1, ..., r_d)``.

    ``sorted_keys[k]`` lists the coordinate-``k`` keys in non-decreasing
    order; the answer for ranks ``r`` is
    ``rows[offsets[idx]:offsets[idx + 1]]`` with ``idx`` the mixed-radix
    index of ``r`` in base ``n + 1``.
    """

    n: int
    d: int
    sorted_keys: tuple[list, ...]
    sorted_rows: tuple[np.ndarray, ...]
    offsets: np.ndarray
    rows: np.ndarray

    @property
    def n_entries(self) -> int:
        return self.offsets.size - 1

    def entry(self, ranks) -> np.ndarray:
        idx = 0
        for r in ranks:
            if not 0 <= r <= self.n:
                raise ValueError(f"rank {r} out of range 0..{self.n}")
            idx = idx * (self.n + 1) + int(r)
        return self.rows[self.offsets[idx]:self.offsets[idx + 1]]


def table_cost(points: PointSet) -> int:
    """Table slots plus stored row indices a :func:`build_table` call would hold."""
    n, d = points.n, points.d
    slots = (n + 1) ** d
    pos = _positions(points)
    # point i appears in every tuple with r_k >= pos_k(i)
    stored = sum(math.prod(n + 1 - int(pos[i, k]) for k in range(d)) for i in range(n))
    return slots + stored


def _positions(points: PointSet) -> np.ndarray:
    """1-based position of each point in each coordinate's stable sorted order."""
    n, d = points.n, points.d
    pos = np.empty((n, d), dtype=np.int64)
    for k in range(d):
        order = np.lexsort((np.arange(n), points.tag[:, k], points.val[:, k], points.inf[:, k]))
        pos[order, k] = np.arange(1, n + 1)
    return pos


def build_table(points: PointSet, budget: int = DEFAULT_TABLE_BUDGET) -> DominanceTable:
    n, d = points.n, points.d
    if n < 1:
        raise ValueError("cannot build a dominance table over an empty point set")
    cost = table_cost(points)
    if cost > budget:
        raise MemoryBudgetError(f"dominance table needs {cost} entries, budget is {budget}")
    pos = _positions(points)
    sorted_rows = tuple(np.argsort(pos[:, k], kind="stable") for k in range(d))
    sorted_keys = tuple([points.key(int(i), k) for i in sorted_rows[k]] for k in range(d))
    # member[r_1, ..., r_d, i] = all_k pos_k(i) <= r_k
    grids = np.arange(n + 1)
    member = np.ones((n + 1,) * d + (n,), dtype=bool)
    for k in range(d):
        shape = [1] * (d + 1)
        shape[k] = n + 1
        member &= grids.reshape(shape) >= pos[:, k]
    flat = member.reshape(-1, n)
    counts = flat.sum(axis=1)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    rows = np.nonzero(flat)[1].astype(np.int64)
    return DominanceTable(n, d, sorted_keys, sorted_rows, offsets, rows)


def table_ranks(table: DominanceTable, p) -> tuple[int, ...]:
    """Binary search: ``r_k`` = number of points whose coordinate ``k`` is <= ``p[k]``."""
    q_inf, q_val, q_tag = _query_arrays(p, table.d)
    return tuple(
        bisect.bisect_right(table.sorted_keys[k], (int(q_inf[k]), float(q_val[k]), int(q_tag[k])))
        for k in range(table.d)
    )


def query_table(table: DominanceTable, p) -> np.ndarray:
    return table.entry(table_ranks(table, p))


def all_rank_tuples(table: DominanceTable):
    return itertools.product(range(table.n + 1), repeat=table.d)
