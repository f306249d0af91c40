"""The numba kernels and the numpy fallback must agree bit for bit, counters included."""

import os
import subprocess
import sys

import numpy as np
import pytest

from gdfv import (
    MulStats,
    PointSet,
    build_tree,
    gdfv_decode,
    gdfv_preprocess,
    get_backend,
    multiply_spliced,
    multiply_trivial,
    preprocess_spliced,
    query_tree,
    set_backend,
    use_backend,
    viterbi_baseline,
)
from gdfv.bench import gen_random_model

NI = -np.inf


def both(fn):
    out = {}
    for name in ("numba", "numpy"):
        with use_backend(name):
            out[name] = fn()
    return out["numba"], out["numpy"]


def canonical(tree):
    """Preorder walk; node ids differ between builders (depth- vs breadth-first numbering)."""
    f = tree.forest
    out, stack = [], [int(f.roots[0])]
    while stack:
        u = stack.pop()
        k = int(f.kind[u])
        rec = (k, int(f.dim[u]), int(f.size[u]))
        if k == 0:
            rec += (f.g_inf[u], f.g_val[u], f.g_tag[u])
            stack += [int(f.proj[u]), int(f.plus[u]), int(f.minus[u])]
        elif k == 1:
            rec += tuple(f.leaf_rows[f.lo[u]:f.hi[u]].tolist())
        else:
            rec += (int(f.lo[u]),)
        out.append(rec)
    return out


@pytest.mark.parametrize("seed", range(15))
def test_trees_identical(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(1, 120)), int(rng.integers(1, 6))
    pts = PointSet.from_real(rng.integers(0, 4, (n, d)).astype(float))
    a, b = both(lambda: build_tree(pts))
    assert canonical(a) == canonical(b)
    for _ in range(20):
        p = rng.integers(-1, 5, d).astype(float)
        results = []
        for tree in (a, b):
            for name in ("numba", "numpy"):
                with use_backend(name):
                    r, s = query_tree(tree, p, with_stats=True)
                results.append((sorted(r.tolist()), s))
        assert all(x == results[0] for x in results)


@pytest.mark.parametrize("seed", range(10))
def test_multiply_identical(seed):
    rng = np.random.default_rng(seed)
    m, n, t = int(rng.integers(1, 40)), int(rng.integers(1, 40)), int(rng.integers(1, 5))
    A = np.where(rng.random((m, n)) < 0.15, NI, rng.integers(0, 5, (m, n)).astype(float))
    b = np.where(rng.random(n) < 0.15, NI, rng.integers(0, 5, n).astype(float))

    def run():
        stats = MulStats()
        r = multiply_spliced(preprocess_spliced(A, t), b, stats)
        return r, stats, multiply_trivial(A, b)

    (ra, sa, ta), (rb, sb, tb) = both(run)
    np.testing.assert_array_equal(ra.values, rb.values)
    np.testing.assert_array_equal(ra.argmax, rb.argmax)
    np.testing.assert_array_equal(ta.argmax, tb.argmax)
    assert sa == sb


def test_decoders_identical():
    model = gen_random_model(12, 3, 1)
    obs = np.random.default_rng(0).integers(0, 3, 60)
    (va, _), (vb, _) = both(lambda: viterbi_baseline(model, obs))
    assert va.path.tolist() == vb.path.tolist() and va.log_prob == vb.log_prob
    (ga, _), (gb, _) = both(lambda: gdfv_decode(gdfv_preprocess(model, t=3), obs))
    assert ga.path.tolist() == gb.path.tolist() and ga.log_prob == gb.log_prob


def test_backend_switching():
    before = get_backend()
    with use_backend("numpy"):
        assert get_backend() == "numpy"
    assert get_backend() == before
    with pytest.raises(ValueError):
        set_backend("fortran")


def test_env_flag_selects_backend():
    code = "import gdfv; print(gdfv.get_backend())"
    env = dict(os.environ, GDFV_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["GDFV_BACKEND"] = "bogus"
    bad = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert bad.returncode != 0 and "GDFV_BACKEND" in bad.stderr
