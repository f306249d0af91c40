"""Acceptance criteria C1-C7. Each test records one line in conftest.ACCEPTANCE."""

import csv
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from gdfv import (
    MulStats,
    PointSet,
    brute_force_decode,
    build_table,
    build_tree,
    dominated_by_scan,
    gdfv_decode,
    gdfv_preprocess,
    multiply_spliced,
    multiply_trivial,
    preprocess_spliced,
    query_table,
    query_tree,
    tree_bounds,
    viterbi_baseline,
)
from gdfv.bench import BenchConfig, bench_mul, gen_random_model
from gdfv.cli import main
from helpers import near_tie_on_path

REL_TOL = 1e-9
SEED = 20240501


def record(cid: str, ok: bool, detail: str):
    ACCEPTANCE[cid] = (ok, detail)
    print(f"{cid} {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def rel_close(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    same_inf = np.isneginf(a) & np.isneginf(b)
    with np.errstate(invalid="ignore"):
        return same_inf | (np.abs(a - b) <= REL_TOL * np.abs(b))


def runner_up_gap_ok(A, b, winner):
    """Rows whose runner-up is more than REL_TOL relatively below the winner."""
    s = A + b[None, :]
    top2 = -np.sort(-s, axis=1)[:, :2] if s.shape[1] > 1 else np.column_stack([s[:, 0], np.full(len(s), -np.inf)])
    first, second = top2[:, 0], top2[:, 1]
    with np.errstate(invalid="ignore"):
        separated = np.isneginf(second) | (first - second > REL_TOL * np.abs(first))
    return separated & np.isfinite(first)


# ---------------------------------------------------------------------------
# C1 + C4


@pytest.fixture(scope="module")
def c1_run():
    sizes = range(8, 257, 8)
    instances = [(n, t, k) for k in range(11) for t in (2, 3, 4) for n in sizes]
    t0 = time.perf_counter()
    bad_values = bad_argmax = checked_argmax = 0
    reported = expected = violations = 0
    for idx, (n, t, k) in enumerate(instances):
        rng = np.random.default_rng([SEED, idx])
        A = 1.0 - rng.random((n, n))
        b = 1.0 - rng.random(n)
        if idx % 10 == 0:
            A[rng.random((n, n)) < 0.2] = -np.inf
            b[rng.random(n) < 0.2] = -np.inf
        sm = preprocess_spliced(A, t)
        stats = MulStats()
        try:
            got = multiply_spliced(sm, b, stats)
        except AssertionError:
            violations += 1
            continue
        ref = multiply_trivial(A, b)
        bad_values += int((~rel_close(got.values, ref.values)).sum())
        sep = runner_up_gap_ok(A, b, ref.argmax)
        checked_argmax += int(sep.sum())
        bad_argmax += int((got.argmax[sep] != ref.argmax[sep]).sum())
        reported += stats.reported
        expected += n * sm.n_blocks
    elapsed = time.perf_counter() - t0
    return dict(count=len(instances), elapsed=elapsed, bad_values=bad_values, bad_argmax=bad_argmax,
                checked_argmax=checked_argmax, reported=reported, expected=expected, violations=violations)


def test_c1_multiplication_oracle(c1_run):
    r = c1_run
    ok = r["count"] >= 1000 and r["bad_values"] == 0 and r["bad_argmax"] == 0 and r["elapsed"] < 60
    record("C1", ok, f"{r['count']} instances, {r['bad_values']} value and {r['bad_argmax']} argmax "
                     f"mismatches ({r['checked_argmax']} argmax rows checked), {r['elapsed']:.1f}s < 60s")


def test_c4_single_write(c1_run):
    r = c1_run
    ok = r["violations"] == 0 and r["reported"] == r["expected"]
    record("C4", ok, f"{r['violations']} violations, reported rows {r['reported']} == m*blocks {r['expected']}")


# ---------------------------------------------------------------------------
# C2


def test_c2_decoder_agreement():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    models = 0
    for i in range(220):
        n = int(rng.integers(8, 65))
        k = int(rng.integers(2, 9))
        m = int(rng.integers(1, 201))
        model = gen_random_model(n, k, [SEED, i])
        obs = rng.integers(0, k, m)
        ref, _ = viterbi_baseline(model, obs)
        # default alpha gives width 1 below 256 states, so also force wider blocks
        t = None if i % 4 == 0 else int(rng.integers(2, 5))
        got, _ = gdfv_decode(gdfv_preprocess(model, t=t), obs)
        worst = max(worst, abs(got.log_prob - ref.log_prob) / max(1.0, abs(ref.log_prob)))
        models += 1

    small = exact = guarded = small_bad = 0
    for n in range(2, 6):
        for m in range(1, 9):
            for rep in range(6):
                model = gen_random_model(n, 3, [SEED, n, m, rep])
                obs = rng.integers(0, 3, m)
                bf = brute_force_decode(model, obs)
                ref, trellis = viterbi_baseline(model, obs)
                got, _ = gdfv_decode(gdfv_preprocess(model, t=min(n, 1 + rep % 3)), obs)
                small += 1
                if not (bf.log_prob == ref.log_prob == got.log_prob):
                    small_bad += 1
                    continue
                if near_tie_on_path(model, obs, trellis, ref.path):
                    guarded += 1
                    continue
                same = bf.path.tolist() == ref.path.tolist() == got.path.tolist()
                exact += same
                small_bad += not same
    elapsed = time.perf_counter() - t0
    ok = models >= 200 and worst <= REL_TOL and small_bad == 0 and elapsed < 60
    record("C2", ok, f"{models} models, worst rel diff {worst:.2e}; {small} brute-force instances, "
                     f"{exact} exact path matches, {guarded} near-tie (log-prob only), {small_bad} bad; "
                     f"{elapsed:.1f}s < 60s")


# ---------------------------------------------------------------------------
# C3 + C6


def crafted_sets(rng):
    for d in range(1, 7):
        for n in (1, 2, 7, 64, 256):
            yield np.zeros((n, d))                                 # all duplicates
            yield np.tile(rng.integers(0, 3, d), (n, 1)).astype(float)
            yield np.repeat(np.arange(n)[:, None] % 2, d, axis=1).astype(float)   # all ties per column
    # small sets where the lookup table is built too
    for _ in range(150):
        yield rng.integers(0, 4, (int(rng.integers(1, 17)), int(rng.integers(1, 4)))).astype(float)


@pytest.fixture(scope="module")
def c3_run():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    sets = list(crafted_sets(rng))
    while len(sets) < 1200:
        n = int(rng.integers(1, 257))
        d = int(rng.integers(1, 7))
        levels = int(rng.choice([2, 4, 16, 1000]))
        sets.append(rng.integers(0, levels, (n, d)).astype(float))

    pairs = mismatches = table_pairs = table_bad = 0
    nodes_over = work_over = splits_over = leaves_over = 0
    worst_nodes = worst_work = 0.0
    for B in sets:
        n, d = B.shape
        pts = PointSet.from_real(B)
        tree = build_tree(pts)
        bounds = tree_bounds(n, d)
        splits, leaves = tree.node_counts()
        cap = bounds["nodes_per_kind"]
        worst_nodes = max(worst_nodes, (splits + leaves) / cap)
        nodes_over += splits + leaves > cap
        splits_over += splits > cap
        leaves_over += leaves > cap
        worst_work = max(worst_work, tree.build_work() / bounds["build_work"])
        work_over += tree.build_work() > bounds["build_work"]

        table = build_table(pts) if d <= 3 and n <= 16 else None
        for _ in range(10):
            # half the queries reuse point coordinates so ties are exercised
            if rng.random() < 0.5:
                p = B[rng.integers(0, n)] + rng.integers(-1, 2, d)
            else:
                p = rng.integers(-1, max(3, int(B.max()) + 2), d).astype(float)
            got = query_tree(tree, p)
            pairs += 1
            mismatches += not np.array_equal(got, dominated_by_scan(pts, p))
            if table is not None:
                table_pairs += 1
                table_bad += not np.array_equal(query_table(table, p), got)
    elapsed = time.perf_counter() - t0
    return dict(trees=len(sets), pairs=pairs, mismatches=mismatches, table_pairs=table_pairs,
                table_bad=table_bad, elapsed=elapsed, nodes_over=nodes_over, splits_over=splits_over,
                leaves_over=leaves_over, worst_nodes=worst_nodes, work_over=work_over, worst_work=worst_work)


def test_c3_dominance_oracle(c3_run):
    r = c3_run
    ok = r["pairs"] >= 10_000 and r["mismatches"] == 0 and r["table_bad"] == 0 and r["elapsed"] < 30
    record("C3", ok, f"{r['pairs']} (B,p) pairs over {r['trees']} sets, {r['mismatches']} mismatches; "
                     f"table vs tree {r['table_pairs']} pairs, {r['table_bad']} mismatches; {r['elapsed']:.1f}s < 30s")


def test_c6_recurrence_conformance(c3_run):
    r = c3_run
    ok = r["nodes_over"] == 0 and r["work_over"] == 0
    record("C6", ok, f"total nodes > 3^ceil(log2 n) in {r['nodes_over']}/{r['trees']} trees "
                     f"(worst {r['worst_nodes']:.3f}x; split nodes over: {r['splits_over']}, "
                     f"leaves over: {r['leaves_over']}); build work over bound in {r['work_over']} "
                     f"(worst {r['worst_work']:.3f} of bound)")


# ---------------------------------------------------------------------------
# C5


def test_c5_sublinear_scaling():
    t0 = time.perf_counter()
    ns = [2**e for e in range(6, 15)]
    slopes, ratios = {}, {}
    for t in (2, 3, 4):
        means = []
        for n in ns:
            rng = np.random.default_rng([SEED, t, n])
            A = 1.0 - rng.random((n, t))
            sm = preprocess_spliced(A, t)
            stats = MulStats()
            vectors = 200
            for v in 1.0 - rng.random((vectors, t)):
                multiply_spliced(sm, v, stats)
            means.append(stats.visits / (vectors * t))
            del sm
        slopes[t] = float(np.polyfit(np.log(ns), np.log(means), 1)[0])
        report = bench_mul(BenchConfig(seed=SEED + t, trials=25, vectors=10_000, n=4096, t=t))
        ratios[t] = float(np.median(report.ratios("gdfv-tree")))
    elapsed = time.perf_counter() - t0
    ok = all(s < 0.9 for s in slopes.values()) and all(r > 1.5 for r in ratios.values()) and elapsed < 600
    detail = "; ".join(f"t={t}: slope {slopes[t]:.3f} < 0.9, median ratio {ratios[t]:.2f} > 1.5" for t in slopes)
    record("C5", ok, f"{detail}; {elapsed:.0f}s < 600s")


# ---------------------------------------------------------------------------
# C7


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = [r for r in rows[1:] if not r[0].startswith("#")]
    summary = [r for r in rows[1:] if r[0] == "#summary"]
    return header, data, summary


def test_c7_bench_protocol(tmp_path):
    t0 = time.perf_counter()
    mul_csv, dec_csv = tmp_path / "mul.csv", tmp_path / "decode.csv"
    rc_mul = main(["bench-mul", "--n", "64", "--alpha", "0.25", "--seed", "7", "--out", str(mul_csv)])
    rc_dec = main(["bench-decode", "--n", "64", "--m", "1000", "--alpha", "0.25", "--seed", "7",
                   "--out", str(dec_csv)])
    problems = []
    if rc_mul or rc_dec:
        problems.append(f"exit codes {rc_mul}/{rc_dec}")
    for path, algs in ((mul_csv, {"trivial", "gdfv-tree"}), (dec_csv, {"trivial", "gdfv-tree"})):
        if not path.exists():
            problems.append(f"{path.name} missing")
            continue
        header, data, summary = read_csv(path)
        if header != ["trial", "algorithm", "elapsed_ns", "comparisons", "tree_visits", "checksum"]:
            problems.append(f"{path.name} header {header}")
        if {r[1] for r in data} != algs or len(data) != 25 * len(algs):
            problems.append(f"{path.name} has {len(data)} rows")
        if sorted({int(r[0]) for r in data}) != list(range(25)):
            problems.append(f"{path.name} trials")
        if len(summary) < 2:
            problems.append(f"{path.name} summary block")
    elapsed = time.perf_counter() - t0
    record("C7", not problems, "; ".join(problems) or
           f"bench-mul and bench-decode: 25 trials, gate passed, CSV schema valid ({elapsed:.0f}s)")
