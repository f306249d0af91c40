"""Packed divide-and-conquer dominance trees.

A forest holds ``T`` trees, each over ``m`` points of dimension ``d`` whose
coordinates are lexicographic triples stored as three parallel arrays
``(inf, val, tag)``. Real-valued points use ``inf = tag = 0``.

Node layout (flat arrays, one entry per node):

* ``kind``  SPLIT (internal), ALL (active dimension 0: report every row) or
  ONE (single point: check the remaining coordinates).
* ``dim``   active dimension of the node's subproblem.
* ``size``  number of points in the node's subproblem.
* ``g_*``   split value: the active coordinate of the first point of the plus
  half in stable sorted order.
* ``minus``/``plus``/``proj`` child ids (``proj`` drops the active coordinate).
* ``lo``/``hi`` range into ``leaf_rows`` for ALL leaves; ``lo`` is the row id
  for ONE leaves.

Tree shape depends only on ``(m, d)``, so node and leaf-row counts are known
before building (:func:`tree_shape`).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._backend import get_backend, njit

SPLIT, ALL, ONE = 0, 1, 2

# bytes per node: kind, dim (int8), size, g_inf, g_tag, minus, plus, proj, lo, hi (int32), g_val (f8)
NODE_BYTES = 2 + 8 * 4 + 8
DEFAULT_MEM_BUDGET = 2**30
INSERTION_MAX = 32


class MemoryBudgetError(MemoryError):
    """Raised before a build whose footprint would exceed the configured budget."""


@lru_cache(maxsize=None)
def tree_shape(m: int, d: int) -> tuple[int, int, int, int]:
    """Exact ``(split_nodes, leaves, leaf_rows, build_work)`` of a tree over ``m`` points in ``d`` dims.

    ``build_work`` follows U_d(n) = 2 U_d(n/2) + U_{d-1}(n/2) + n with
    U_0(n) = n and U_d(1) = 1 (one unit per point per node).
    """
    if m < 1:
        raise ValueError("a tree needs at least one point")
    if d == 0:
        return (0, 1, m, m)
    if m == 1:
        return (0, 1, 0, 1)
    h = m // 2
    a = tree_shape(h, d)
    b = tree_shape(m - h, d)
    c = tree_shape(h, d - 1)
    return (1 + a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2], a[3] + b[3] + c[3] + m)


def forest_bytes(n_trees: int, m: int, d: int) -> int:
    splits, leaves, rows, _ = tree_shape(m, d)
    per_tree = (splits + leaves) * NODE_BYTES + rows * 4 + m * d * 16
    return n_trees * per_tree


@dataclass(frozen=True)
class Forest:
    kind: np.ndarray
    dim: np.ndarray
    size: np.ndarray
    g_inf: np.ndarray
    g_val: np.ndarray
    g_tag: np.ndarray
    minus: np.ndarray
    plus: np.ndarray
    proj: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    leaf_rows: np.ndarray
    roots: np.ndarray
    p_inf: np.ndarray
    p_val: np.ndarray
    p_tag: np.ndarray

    @property
    def n_trees(self) -> int:
        return self.p_val.shape[0]

    @property
    def n_points(self) -> int:
        return self.p_val.shape[1]

    @property
    def d(self) -> int:
        return self.p_val.shape[2]

    @property
    def n_nodes(self) -> int:
        return self.kind.shape[0]

    @property
    def nbytes(self) -> int:
        return sum(getattr(self, f).nbytes for f in self.__dataclass_fields__)


# ---------------------------------------------------------------------------
# ranks


def coordinate_ranks(p_inf, p_val, p_tag) -> np.ndarray:
    """Dense rank of every coordinate within its (tree, coordinate) column.

    Equal triples share a rank, so sorting members by rank is a stable sort by
    triple order.
    """
    T, m, d = p_val.shape
    if m == 0 or d == 0:
        return np.zeros((T, m, d), dtype=np.int64)
    # (T, d, m): one independent sort per (tree, coordinate) row
    inf = p_inf.transpose(0, 2, 1)
    val = p_val.transpose(0, 2, 1)
    tag = p_tag.transpose(0, 2, 1)
    order = np.lexsort((tag, val, inf), axis=-1)
    s_inf = np.take_along_axis(inf, order, -1)
    s_val = np.take_along_axis(val, order, -1)
    s_tag = np.take_along_axis(tag, order, -1)
    new = np.zeros(order.shape, dtype=np.int64)
    new[..., 1:] = (
        (s_inf[..., 1:] != s_inf[..., :-1])
        | (s_val[..., 1:] != s_val[..., :-1])
        | (s_tag[..., 1:] != s_tag[..., :-1])
    )
    dense = np.cumsum(new, axis=-1)
    ranks = np.empty_like(dense)
    np.put_along_axis(ranks, order, dense, -1)
    return np.ascontiguousarray(ranks.transpose(0, 2, 1))


def _as_points(p_inf, p_val, p_tag):
    p_val = np.ascontiguousarray(p_val, dtype=np.float64)
    p_inf = np.ascontiguousarray(p_inf, dtype=np.int32)
    p_tag = np.ascontiguousarray(p_tag, dtype=np.int32)
    if p_val.ndim != 3 or p_inf.shape != p_val.shape or p_tag.shape != p_val.shape:
        raise ValueError("points must be three arrays of identical shape (trees, points, dims)")
    if np.isnan(p_val).any() or np.isinf(p_val).any():
        raise ValueError("point values must be finite (encode -inf in the inf coordinate)")
    return p_inf, p_val, p_tag


def _allocate(T: int, m: int, d: int):
    splits, leaves, rows, _ = tree_shape(m, d)
    N = T * (splits + leaves)
    return dict(
        kind=np.zeros(N, np.int8),
        dim=np.zeros(N, np.int8),
        size=np.zeros(N, np.int32),
        g_inf=np.zeros(N, np.int32),
        g_val=np.zeros(N, np.float64),
        g_tag=np.zeros(N, np.int32),
        minus=np.full(N, -1, np.int32),
        plus=np.full(N, -1, np.int32),
        proj=np.full(N, -1, np.int32),
        lo=np.zeros(N, np.int32),
        hi=np.zeros(N, np.int32),
        leaf_rows=np.zeros(T * rows, np.int32),
        roots=np.zeros(T, np.int64),
    )


def build_forest(p_inf, p_val, p_tag, mem_budget: int | None = DEFAULT_MEM_BUDGET) -> Forest:
    """Build one tree per leading index of the ``(T, m, d)`` point arrays."""
    p_inf, p_val, p_tag = _as_points(p_inf, p_val, p_tag)
    T, m, d = p_val.shape
    if m < 1:
        raise ValueError("cannot build a dominance tree over an empty point set")
    if d > 127:
        raise ValueError("dimension above 127 is not supported")
    need = forest_bytes(T, m, d)
    if mem_budget is not None and need > mem_budget:
        raise MemoryBudgetError(f"dominance forest needs {need} bytes, budget is {mem_budget}")
    ranks = coordinate_ranks(p_inf, p_val, p_tag)
    arrays = _allocate(T, m, d)
    if get_backend() == "numba":
        splits, leaves, rows, _ = tree_shape(m, d)
        _build_nb(
            ranks, p_inf, p_val, p_tag, splits + leaves, rows,
            arrays["kind"], arrays["dim"], arrays["size"],
            arrays["g_inf"], arrays["g_val"], arrays["g_tag"],
            arrays["minus"], arrays["plus"], arrays["proj"],
            arrays["lo"], arrays["hi"], arrays["leaf_rows"], arrays["roots"],
        )
    else:
        _build_np(ranks, p_inf, p_val, p_tag, arrays)
    return Forest(p_inf=p_inf, p_val=p_val, p_tag=p_tag, **arrays)


@njit
def _build_nb(rank, p_inf, p_val, p_tag, nodes_per_tree, rows_per_tree,
              kind, dim, size, g_inf, g_val, g_tag, minus, plus, proj, lo, hi, leaf_rows, roots):
    T, m, d = rank.shape
    # member lists live on a region stack: a popped task's region always sits above every pending one
    buf = np.empty(3 * m + 64, np.int64)
    tmp = np.empty(m, np.int64)
    keys = np.empty(m, np.int64)
    cap = 3 * 70
    st_node = np.empty(cap, np.int64)
    st_dim = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_len = np.empty(cap, np.int64)
    # 1 when the region is already sorted by the task's active coordinate
    st_sorted = np.empty(cap, np.int8)
    for tr in range(T):
        base = tr * nodes_per_tree
        next_id = base + 1
        rpos = tr * rows_per_tree
        roots[tr] = base
        for i in range(m):
            buf[i] = i
        sp = 0
        st_node[0] = base
        st_dim[0] = d
        st_start[0] = 0
        st_len[0] = m
        st_sorted[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            u = st_node[sp]
            dd = st_dim[sp]
            s = st_start[sp]
            ln = st_len[sp]
            presorted = st_sorted[sp]
            size[u] = ln
            dim[u] = dd
            if dd == 0:
                kind[u] = 1
                lo[u] = rpos
                for k in range(ln):
                    leaf_rows[rpos] = buf[s + k]
                    rpos += 1
                hi[u] = rpos
            elif ln == 1:
                kind[u] = 2
                lo[u] = buf[s]
                hi[u] = buf[s] + 1
            else:
                c = dd - 1
                if presorted:
                    for k in range(ln):
                        tmp[k] = buf[s + k]
                elif ln <= INSERTION_MAX:
                    # stable insertion sort by rank
                    for k in range(ln):
                        row = buf[s + k]
                        key = rank[tr, row, c]
                        j = k
                        while j > 0 and keys[j - 1] > key:
                            keys[j] = keys[j - 1]
                            tmp[j] = tmp[j - 1]
                            j -= 1
                        keys[j] = key
                        tmp[j] = row
                else:
                    for k in range(ln):
                        keys[k] = rank[tr, buf[s + k], c]
                    order = np.argsort(keys[:ln], kind="mergesort")
                    for k in range(ln):
                        tmp[k] = buf[s + order[k]]
                h = ln // 2
                row = tmp[h]
                kind[u] = 0
                g_inf[u] = p_inf[tr, row, c]
                g_val[u] = p_val[tr, row, c]
                g_tag[u] = p_tag[tr, row, c]
                for k in range(ln):
                    buf[s + k] = tmp[k]
                for k in range(h):
                    buf[s + ln + k] = tmp[k]
                mi = next_id
                pl = next_id + 1
                pr = next_id + 2
                next_id += 3
                minus[u] = mi
                plus[u] = pl
                proj[u] = pr
                st_node[sp] = mi
                st_dim[sp] = dd
                st_start[sp] = s
                st_len[sp] = h
                st_sorted[sp] = 1
                sp += 1
                st_node[sp] = pl
                st_dim[sp] = dd
                st_start[sp] = s + h
                st_len[sp] = ln - h
                st_sorted[sp] = 1
                sp += 1
                st_node[sp] = pr
                st_dim[sp] = dd - 1
                st_start[sp] = s + ln
                st_len[sp] = h
                st_sorted[sp] = 0
                sp += 1


def _ragged_arange(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Concatenation of ``arange(s, s + l)`` for every pair."""
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, np.int64)
    offsets = np.cumsum(lengths) - lengths
    return np.repeat(starts - offsets, lengths) + np.arange(total)


def _build_np(ranks, p_inf, p_val, p_tag, out):
    """Level-synchronous build: every node of one depth is split in a single lexsort."""
    T, m, d = p_val.shape
    # current level: segments of ``members`` with their node id, tree and active dim
    seg_node = np.arange(T, dtype=np.int64)
    out["roots"][:] = seg_node
    seg_tree = np.arange(T, dtype=np.int64)
    seg_dim = np.full(T, d, dtype=np.int64)
    seg_len = np.full(T, m, dtype=np.int64)
    members = np.tile(np.arange(m, dtype=np.int64), T)
    next_id = T
    rpos = 0
    while seg_node.size:
        seg_start = np.cumsum(seg_len) - seg_len
        out["size"][seg_node] = seg_len
        out["dim"][seg_node] = seg_dim

        is_all = seg_dim == 0
        is_one = (~is_all) & (seg_len == 1)
        is_split = ~(is_all | is_one)

        if is_all.any():
            lens = seg_len[is_all]
            rows = members[_ragged_arange(seg_start[is_all], lens)]
            nodes = seg_node[is_all]
            out["kind"][nodes] = ALL
            out["lo"][nodes] = rpos + np.cumsum(lens) - lens
            out["hi"][nodes] = rpos + np.cumsum(lens)
            out["leaf_rows"][rpos:rpos + rows.size] = rows
            rpos += rows.size
        if is_one.any():
            nodes = seg_node[is_one]
            rows = members[seg_start[is_one]]
            out["kind"][nodes] = ONE
            out["lo"][nodes] = rows
            out["hi"][nodes] = rows + 1
        if not is_split.any():
            break

        sn, st, sd, sl, ss = (seg_node[is_split], seg_tree[is_split], seg_dim[is_split],
                              seg_len[is_split], seg_start[is_split])
        idx = _ragged_arange(ss, sl)
        local_seg = np.repeat(np.arange(sn.size), sl)
        mem = members[idx]
        trees = st[local_seg]
        coord = sd[local_seg] - 1
        key = ranks[trees, mem, coord]
        order = np.lexsort((key, local_seg))
        mem = mem[order]
        # sorted members are now contiguous per split segment, starting at new offsets
        new_start = np.cumsum(sl) - sl
        half = sl // 2
        pivot_rows = mem[new_start + half]
        c = sd - 1
        out["kind"][sn] = SPLIT
        out["g_inf"][sn] = p_inf[st, pivot_rows, c]
        out["g_val"][sn] = p_val[st, pivot_rows, c]
        out["g_tag"][sn] = p_tag[st, pivot_rows, c]
        k = sn.size
        mi = next_id + 3 * np.arange(k)
        out["minus"][sn] = mi
        out["plus"][sn] = mi + 1
        out["proj"][sn] = mi + 2
        next_id += 3 * k

        # children interleaved per parent as (minus, plus, proj); each is a slice of the sorted parent
        child_node = np.stack([mi, mi + 1, mi + 2], axis=1).ravel()
        child_tree = np.repeat(st, 3)
        child_dim = np.stack([sd, sd, sd - 1], axis=1).ravel()
        child_len = np.stack([half, sl - half, half], axis=1).ravel()
        child_src = np.stack([new_start, new_start + half, new_start], axis=1).ravel()
        members = mem[_ragged_arange(child_src, child_len)]
        seg_node, seg_tree, seg_dim, seg_len = child_node, child_tree, child_dim, child_len


# ---------------------------------------------------------------------------
# queries


@njit(inline="always")
def _lex_less(ai, av, at, bi, bv, bt):
    if ai != bi:
        return ai < bi
    if av != bv:
        return av < bv
    return at < bt


@njit
def _query_tree_nb(root, kind, dim, g_inf, g_val, g_tag, minus, plus, proj, lo, hi, leaf_rows,
                   P_inf, P_val, P_tag, q_inf, q_val, q_tag, out, stack, counters):
    """Report rows of one tree dominated by the query; returns the count.

    ``counters[0]`` accumulates split-node visits, ``counters[1]`` coordinate
    checks at single-point leaves.
    """
    cnt = 0
    sp = 1
    stack[0] = root
    while sp > 0:
        sp -= 1
        u = stack[sp]
        k = kind[u]
        if k == 0:
            counters[0] += 1
            c = dim[u] - 1
            if _lex_less(q_inf[c], q_val[c], q_tag[c], g_inf[u], g_val[u], g_tag[u]):
                stack[sp] = minus[u]
                sp += 1
            else:
                stack[sp] = plus[u]
                stack[sp + 1] = proj[u]
                sp += 2
        elif k == 1:
            for r in range(lo[u], hi[u]):
                out[cnt] = leaf_rows[r]
                cnt += 1
        else:
            row = lo[u]
            ok = True
            for c in range(dim[u]):
                counters[1] += 1
                if _lex_less(q_inf[c], q_val[c], q_tag[c], P_inf[row, c], P_val[row, c], P_tag[row, c]):
                    ok = False
                    break
            if ok:
                out[cnt] = row
                cnt += 1
    return cnt


@njit
def _query_many_nb(roots_sel, tree_sel, kind, dim, g_inf, g_val, g_tag, minus, plus, proj, lo, hi,
                   leaf_rows, P_inf, P_val, P_tag, Q_inf, Q_val, Q_tag, counters):
    Q = roots_sel.shape[0]
    m = P_val.shape[1]
    stack = np.empty(512, np.int64)
    out = np.empty(m, np.int64)
    offsets = np.zeros(Q + 1, np.int64)
    total_cap = max(Q * 4, 16)
    rows = np.empty(total_cap, np.int64)
    pos = 0
    for q in range(Q):
        tr = tree_sel[q]
        cnt = _query_tree_nb(roots_sel[q], kind, dim, g_inf, g_val, g_tag, minus, plus, proj, lo, hi,
                             leaf_rows, P_inf[tr], P_val[tr], P_tag[tr], Q_inf[q], Q_val[q], Q_tag[q],
                             out, stack, counters)
        if pos + cnt > rows.shape[0]:
            grown = np.empty(max(2 * rows.shape[0], pos + cnt), np.int64)
            grown[:pos] = rows[:pos]
            rows = grown
        rows[pos:pos + cnt] = out[:cnt]
        pos += cnt
        offsets[q + 1] = pos
    return rows[:pos], offsets


def _lex_less_np(ai, av, at, bi, bv, bt):
    return (ai < bi) | ((ai == bi) & ((av < bv) | ((av == bv) & (at < bt))))


def query_forest_np(f: Forest, trees: np.ndarray, q_inf, q_val, q_tag):
    """Level-synchronous traversal of many queries at once.

    Returns ``(query_ids, rows, visits, checks)`` with one entry per reported
    (query, row) pair, in no particular order.
    """
    fq = np.arange(trees.size, dtype=np.int64)
    fu = f.roots[trees].astype(np.int64)
    out_q, out_r = [], []
    visits = checks = 0
    d = f.d
    while fq.size:
        k = f.kind[fu]
        split = k == SPLIT
        nq, nu = [], []
        if split.any():
            sq, su = fq[split], fu[split]
            visits += sq.size
            c = f.dim[su].astype(np.int64) - 1
            less = _lex_less_np(q_inf[sq, c], q_val[sq, c], q_tag[sq, c], f.g_inf[su], f.g_val[su], f.g_tag[su])
            more = ~less
            nq += [sq[less], sq[more], sq[more]]
            nu += [f.minus[su[less]], f.plus[su[more]], f.proj[su[more]]]
        al = k == ALL
        if al.any():
            aq, au = fq[al], fu[al]
            lens = (f.hi[au] - f.lo[au]).astype(np.int64)
            out_q.append(np.repeat(aq, lens))
            out_r.append(f.leaf_rows[_ragged_arange(f.lo[au].astype(np.int64), lens)].astype(np.int64))
        one = k == ONE
        if one.any():
            oq, ou = fq[one], fu[one]
            rows = f.lo[ou].astype(np.int64)
            dims = f.dim[ou].astype(np.int64)
            tr = trees[oq]
            fail = _lex_less_np(q_inf[oq], q_val[oq], q_tag[oq],
                                f.p_inf[tr, rows], f.p_val[tr, rows], f.p_tag[tr, rows])
            fail &= np.arange(d)[None, :] < dims[:, None]
            anyfail = fail.any(axis=1)
            first = np.argmax(fail, axis=1)
            checks += int(np.where(anyfail, first + 1, dims).sum())
            out_q.append(oq[~anyfail])
            out_r.append(rows[~anyfail])
        if nq:
            fq = np.concatenate(nq)
            fu = np.concatenate(nu).astype(np.int64)
        else:
            break
    if out_q:
        qs, rs = np.concatenate(out_q), np.concatenate(out_r)
    else:
        qs = rs = np.zeros(0, np.int64)
    return qs, rs, visits, checks


def query_forest(f: Forest, trees, q_inf, q_val, q_tag):
    """Run query ``i`` against tree ``trees[i]``; returns ``(rows, offsets, visits, checks)``.

    Rows reported by query ``i`` are ``rows[offsets[i]:offsets[i + 1]]``
    (sorted ascending in both backends).
    """
    trees = np.asarray(trees, dtype=np.int64)
    q_inf = np.ascontiguousarray(q_inf, dtype=np.int32)
    q_val = np.ascontiguousarray(q_val, dtype=np.float64)
    q_tag = np.ascontiguousarray(q_tag, dtype=np.int32)
    if q_val.shape != (trees.size, f.d):
        raise ValueError(f"queries must have shape ({trees.size}, {f.d}), got {q_val.shape}")
    if get_backend() == "numba":
        counters = np.zeros(2, np.int64)
        rows, offsets = _query_many_nb(
            f.roots[trees], trees, f.kind, f.dim, f.g_inf, f.g_val, f.g_tag, f.minus, f.plus, f.proj,
            f.lo, f.hi, f.leaf_rows, f.p_inf, f.p_val, f.p_tag, q_inf, q_val, q_tag, counters)
        # per-query sort keeps output canonical across backends
        order = np.lexsort((rows, np.repeat(np.arange(trees.size), np.diff(offsets))))
        return rows[order], offsets, int(counters[0]), int(counters[1])
    qs, rs, visits, checks = query_forest_np(f, trees, q_inf, q_val, q_tag)
    order = np.lexsort((rs, qs))
    counts = np.bincount(qs, minlength=trees.size)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return rs[order], offsets, visits, checks
