"""Online matrix-vector (max,+) multiplication.

``(A * b)[i] = max_j A[i, j] + b[j]`` over R U {-inf}. :func:`multiply_trivial`
evaluates that definition directly. The preprocessed engine splits ``A`` into
width-``t`` blocks (padding with -inf columns). For every block and every
pivot column ``j*`` it builds one dominance tree over the rows' difference
vectors ``A[i, j] - A[i, j*]``. A product then needs ``t`` dominance queries
per block plus a rowwise merge.

All arithmetic inside the engine happens on lifted triples, which makes the
winning column of every row unique. Ties resolve to the largest column index,
and :func:`multiply_trivial` uses the same rule so both routes agree exactly.
Column indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import get_backend, njit
from ._forest import (
    DEFAULT_MEM_BUDGET,
    Forest,
    MemoryBudgetError,
    _query_tree_nb,
    build_forest,
    forest_bytes,
    query_forest_np,
)
from .extended import NEG_INF, check_extended_array, lift_array

__all__ = [
    "MulResult",
    "MulStats",
    "SingleWriteViolation",
    "SplicedMultiplier",
    "BlockPreprocessed",
    "MemoryBudgetError",
    "multiply_trivial",
    "preprocess_block",
    "multiply_block",
    "preprocess_spliced",
    "multiply_spliced",
    "TableMultiplier",
    "preprocess_spliced_table",
    "multiply_spliced_table",
]


class SingleWriteViolation(AssertionError):
    """A row was claimed by zero or several pivots of one block."""


@dataclass(frozen=True)
class MulResult:
    values: np.ndarray
    argmax: np.ndarray


@dataclass
class MulStats:
    """Operation counters, accumulated across calls that share the object."""

    visits: int = 0
    leaf_checks: int = 0
    reported: int = 0
    products: int = 0

    @property
    def work(self) -> int:
        """Split-node visits + leaf coordinate checks + one merge per reported row."""
        return self.visits + self.leaf_checks + self.reported


def _check_matrix(A) -> np.ndarray:
    A = check_extended_array(A, "matrix")
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"matrix must be 2-D with positive dimensions, got shape {A.shape}")
    return A


def _check_vector(b, n: int) -> np.ndarray:
    b = check_extended_array(b, "vector")
    if b.ndim != 1 or b.shape[0] != n:
        raise ValueError(f"vector length mismatch: expected {n}, got shape {b.shape}")
    return b


# ---------------------------------------------------------------------------
# trivial route


@njit
def _trivial_nb(A, b, values, argmax):
    m, n = A.shape
    for i in range(m):
        best = A[i, 0] + b[0]
        arg = 0
        for j in range(1, n):
            s = A[i, j] + b[j]
            if s >= best:
                best = s
                arg = j
        values[i] = best
        argmax[i] = arg


def _trivial_np(A, b):
    S = A + b[None, :]
    rev = np.argmax(S[:, ::-1], axis=1)
    argmax = S.shape[1] - 1 - rev
    return S[np.arange(S.shape[0]), argmax], argmax


def multiply_trivial(A, b) -> MulResult:
    """Direct evaluation; argmax ties go to the largest column."""
    A = _check_matrix(A)
    b = _check_vector(b, A.shape[1])
    if get_backend() == "numba":
        values = np.empty(A.shape[0])
        argmax = np.empty(A.shape[0], np.int64)
        _trivial_nb(np.ascontiguousarray(A), b, values, argmax)
    else:
        values, argmax = _trivial_np(A, b)
    # a row with no finite candidate reports the last column
    argmax = np.where(np.isneginf(values), A.shape[1] - 1, argmax)
    return MulResult(values, argmax)


# ---------------------------------------------------------------------------
# preprocessed route


@dataclass(frozen=True)
class SplicedMultiplier:
    """``A`` padded to ``n_padded`` columns, with one dominance tree per (block, pivot).

    Tree ``c`` belongs to global pivot column ``c`` (block ``c // t``).
    """

    m: int
    n: int
    t: int
    a_inf: np.ndarray
    a_val: np.ndarray
    forest: Forest = field(repr=False)

    @property
    def n_padded(self) -> int:
        return self.a_val.shape[1]

    @property
    def n_blocks(self) -> int:
        return self.n_padded // self.t

    @property
    def nbytes(self) -> int:
        return self.forest.nbytes + self.a_inf.nbytes + self.a_val.nbytes


# A block is a splice with a single width-t block.
BlockPreprocessed = SplicedMultiplier


def estimate_bytes(m: int, n: int, t: int) -> int:
    n_padded = -(-n // t) * t
    return forest_bytes(n_padded, m, t) + m * n_padded * 12


def _difference_points(a_inf, a_val, t):
    """Points for every tree: ``P[c, i, j] = A[i, blk(c)*t + j] - A[i, c]`` in triple arithmetic."""
    m, n_padded = a_val.shape
    L = n_padded // t
    blk_inf = a_inf.reshape(m, L, t).transpose(1, 0, 2)  # (L, m, t)
    blk_val = a_val.reshape(m, L, t).transpose(1, 0, 2)
    # (L, t_pivot, m, t)
    p_inf = blk_inf[:, None, :, :] - blk_inf.transpose(0, 2, 1)[:, :, :, None]
    p_val = blk_val[:, None, :, :] - blk_val.transpose(0, 2, 1)[:, :, :, None]
    return (p_inf.reshape(n_padded, m, t), p_val.reshape(n_padded, m, t),
            np.zeros((n_padded, m, t), np.int32))


def preprocess_spliced(A, t: int, mem_budget: int | None = DEFAULT_MEM_BUDGET) -> SplicedMultiplier:
    A = _check_matrix(A)
    if t < 1:
        raise ValueError(f"block width must be >= 1, got {t}")
    m, n = A.shape
    if mem_budget is not None:
        need = estimate_bytes(m, n, t)
        if need > mem_budget:
            raise MemoryBudgetError(
                f"preprocessing a {m}x{n} matrix with t={t} needs about {need} bytes, budget is {mem_budget}")
    n_padded = -(-n // t) * t
    padded = np.full((m, n_padded), NEG_INF)
    padded[:, :n] = A
    a_inf, a_val = lift_array(padded)
    p_inf, p_val, p_tag = _difference_points(a_inf, a_val, t)
    forest = build_forest(p_inf, p_val, p_tag, mem_budget=None)
    return SplicedMultiplier(m, n, t, np.ascontiguousarray(a_inf), np.ascontiguousarray(a_val), forest)


def preprocess_block(A_block, mem_budget: int | None = DEFAULT_MEM_BUDGET) -> BlockPreprocessed:
    A_block = _check_matrix(A_block)
    return preprocess_spliced(A_block, A_block.shape[1], mem_budget=mem_budget)


@njit
def _spliced_nb(roots, kind, dim, g_inf, g_val, g_tag, minus, plus, proj, lo, hi, leaf_rows,
                P_inf, P_val, P_tag, a_inf, a_val, b_inf, b_val, t,
                best_inf, best_val, best_tag, counters):
    """Returns the number of (block, row) pairs not written exactly once."""
    m, n_padded = a_val.shape
    L = n_padded // t
    q_inf = np.empty(t, np.int32)
    q_val = np.empty(t, np.float64)
    q_tag = np.empty(t, np.int32)
    out = np.empty(m, np.int64)
    stack = np.empty(512, np.int64)
    writes = np.zeros(m, np.int64)
    qc = np.zeros(2, np.int64)
    violations = 0
    for i in range(m):
        best_inf[i] = -(2**30)
        best_val[i] = 0.0
        best_tag[i] = 0
    for blk in range(L):
        base = blk * t
        for i in range(m):
            writes[i] = 0
        for js in range(t):
            c = base + js
            for j in range(t):
                q_inf[j] = b_inf[c] - b_inf[base + j]
                q_val[j] = b_val[c] - b_val[base + j]
                q_tag[j] = js - j
            cnt = _query_tree_nb(roots[c], kind, dim, g_inf, g_val, g_tag, minus, plus, proj, lo, hi,
                                 leaf_rows, P_inf[c], P_val[c], P_tag[c], q_inf, q_val, q_tag,
                                 out, stack, qc)
            counters[2] += cnt
            for k in range(cnt):
                i = out[k]
                writes[i] += 1
                s_inf = a_inf[i, c] + b_inf[c]
                s_val = a_val[i, c] + b_val[c]
                s_tag = c + 1
                # merge on (inf, value, global column): independent of block order
                if (s_inf > best_inf[i] or (s_inf == best_inf[i] and (
                        s_val > best_val[i] or (s_val == best_val[i] and s_tag > best_tag[i])))):
                    best_inf[i] = s_inf
                    best_val[i] = s_val
                    best_tag[i] = s_tag
        for i in range(m):
            if writes[i] != 1:
                violations += 1
    counters[0] += qc[0]
    counters[1] += qc[1]
    return violations


def _spliced_np(sm: SplicedMultiplier, b_inf, b_val):
    m, t, L = sm.m, sm.t, sm.n_blocks
    f = sm.forest
    bi = b_inf.reshape(L, t)
    bv = b_val.reshape(L, t)
    # query for pivot (blk, js): coordinate j holds b[blk, js] - b[blk, j] with tag js - j
    q_inf = (bi[:, :, None] - bi[:, None, :]).reshape(L * t, t)
    q_val = (bv[:, :, None] - bv[:, None, :]).reshape(L * t, t)
    js = np.arange(t)
    q_tag = np.broadcast_to(js[:, None] - js[None, :], (L, t, t)).reshape(L * t, t)
    trees = np.arange(L * t, dtype=np.int64)
    qs, rows, visits, checks = query_forest_np(f, trees, q_inf, q_val, q_tag)
    writes = np.bincount((qs // t) * m + rows, minlength=L * m)
    violations = int((writes != 1).sum())
    s_inf = sm.a_inf[rows, qs] + b_inf[qs]
    s_val = sm.a_val[rows, qs] + b_val[qs]
    s_tag = qs + 1
    order = np.lexsort((s_tag, s_val, s_inf, rows))
    last = np.flatnonzero(np.r_[rows[order][1:] != rows[order][:-1], True])
    pick = order[last]
    best_inf = np.full(m, -(2**30), np.int64)
    best_val = np.zeros(m)
    best_tag = np.zeros(m, np.int64)
    best_inf[rows[pick]] = s_inf[pick]
    best_val[rows[pick]] = s_val[pick]
    best_tag[rows[pick]] = s_tag[pick]
    return best_inf, best_val, best_tag, (visits, checks, int(qs.size)), violations


def multiply_spliced(sm: SplicedMultiplier, b, stats: MulStats | None = None) -> MulResult:
    b = _check_vector(b, sm.n)
    padded = np.full(sm.n_padded, NEG_INF)
    padded[:sm.n] = b
    b_inf, b_val = lift_array(padded)
    if get_backend() == "numba":
        f = sm.forest
        best_inf = np.empty(sm.m, np.int64)
        best_val = np.empty(sm.m)
        best_tag = np.empty(sm.m, np.int64)
        counters = np.zeros(3, np.int64)
        violations = _spliced_nb(
            f.roots, f.kind, f.dim, f.g_inf, f.g_val, f.g_tag, f.minus, f.plus, f.proj, f.lo, f.hi,
            f.leaf_rows, f.p_inf, f.p_val, f.p_tag, sm.a_inf, sm.a_val, b_inf, b_val, sm.t,
            best_inf, best_val, best_tag, counters)
        counts = tuple(int(c) for c in counters)
    else:
        best_inf, best_val, best_tag, counts, violations = _spliced_np(sm, b_inf, b_val)
    if violations:
        raise SingleWriteViolation(
            f"{violations} (block, row) pairs were not reported exactly once; "
            "the tie-breaking encoding is broken for this input")
    if stats is not None:
        stats.visits += counts[0]
        stats.leaf_checks += counts[1]
        stats.reported += counts[2]
        stats.products += 1
    finite = best_inf == 0
    values = np.where(finite, best_val, NEG_INF)
    argmax = np.where(finite, best_tag - 1, sm.n - 1)
    return MulResult(values, argmax)


def multiply_block(bp: BlockPreprocessed, b_block, stats: MulStats | None = None) -> MulResult:
    if bp.n_blocks != 1:
        raise ValueError(f"expected a single-block multiplier, got {bp.n_blocks} blocks")
    return multiply_spliced(bp, b_block, stats=stats)


# ---------------------------------------------------------------------------
# lookup-table route (exponential preprocessing, small instances only)


@dataclass(frozen=True)
class TableMultiplier:
    m: int
    n: int
    t: int
    a_inf: np.ndarray
    a_val: np.ndarray
    tables: tuple = field(repr=False)

    @property
    def n_padded(self) -> int:
        return self.a_val.shape[1]

    @property
    def n_blocks(self) -> int:
        return self.n_padded // self.t


def preprocess_spliced_table(A, t: int, budget: int | None = None) -> TableMultiplier:
    """Like :func:`preprocess_spliced` but each pivot gets a :class:`~gdfv.dominance.DominanceTable`.

    ``budget`` caps stored table entries per pivot.
    """
    from .dominance import DEFAULT_TABLE_BUDGET, PointSet, build_table

    A = _check_matrix(A)
    if t < 1:
        raise ValueError(f"block width must be >= 1, got {t}")
    m, n = A.shape
    n_padded = -(-n // t) * t
    padded = np.full((m, n_padded), NEG_INF)
    padded[:, :n] = A
    a_inf, a_val = lift_array(padded)
    p_inf, p_val, p_tag = _difference_points(a_inf, a_val, t)
    budget = DEFAULT_TABLE_BUDGET if budget is None else budget
    tables = tuple(
        build_table(PointSet.from_triples(p_inf[c], p_val[c], p_tag[c]), budget=budget)
        for c in range(n_padded)
    )
    return TableMultiplier(m, n, t, a_inf, a_val, tables)


def multiply_spliced_table(tm: TableMultiplier, b, stats: MulStats | None = None) -> MulResult:
    from .dominance import query_table

    b = _check_vector(b, tm.n)
    padded = np.full(tm.n_padded, NEG_INF)
    padded[:tm.n] = b
    b_inf, b_val = lift_array(padded)
    t, m = tm.t, tm.m
    best = [(-(2**30), 0.0, 0)] * m
    reported = 0
    for blk in range(tm.n_blocks):
        base = blk * t
        writes = np.zeros(m, np.int64)
        for js in range(t):
            c = base + js
            q = (b_inf[c] - b_inf[base:base + t], b_val[c] - b_val[base:base + t], js - np.arange(t))
            rows = query_table(tm.tables[c], q)
            reported += rows.size
            writes[rows] += 1
            for i in rows.tolist():
                cand = (int(tm.a_inf[i, c] + b_inf[c]), float(tm.a_val[i, c] + b_val[c]), c + 1)
                if cand > best[i]:
                    best[i] = cand
        bad = int((writes != 1).sum())
        if bad:
            raise SingleWriteViolation(f"{bad} rows of block {blk} were not reported exactly once")
    if stats is not None:
        stats.reported += reported
        stats.products += 1
    values = np.array([v if k == 0 else NEG_INF for k, v, _ in best])
    argmax = np.array([j - 1 if k == 0 else tm.n - 1 for k, _, j in best], dtype=np.int64)
    return MulResult(values, argmax)
