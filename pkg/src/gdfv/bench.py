"""Seeded benchmark harness for the multiplication engine and the decoders.

Instances are drawn uniformly from (0, 1] with numpy's PCG64 generator; trial
``k`` of a run seeded with ``s`` uses ``SeedSequence([s, k])``, so any trial
can be regenerated on its own. Every trial is gated on correctness (values
within 1e-9 relative of the reference) before any of its records exist.

In ``ops`` mode the ``elapsed_ns`` column is 0 and every other column is
deterministic. The ``comparisons`` column counts candidate evaluations for
the trivial route and work units (split-node visits + leaf coordinate checks
+ merged rows) for the dominance routes.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._forest import DEFAULT_MEM_BUDGET
from .hmm import HiddenMarkovModel, block_width, gdfv_decode, gdfv_preprocess, gdfv_table_decode, viterbi_baseline
from .maxplus import (
    MulStats,
    multiply_spliced,
    multiply_spliced_table,
    multiply_trivial,
    preprocess_spliced,
    preprocess_spliced_table,
)
from .textio import format_matrix, format_vector

CSV_HEADER = ("trial", "algorithm", "elapsed_ns", "comparisons", "tree_visits", "checksum")
SUMMARY_HEADER = ("#summary", "algorithm", "mode", "min", "median", "mean", "max", "stddev")
REL_TOL = 1e-9


class CorrectnessError(AssertionError):
    def __init__(self, message: str, dump: str | None = None):
        self.dump = dump
        super().__init__(message if dump is None else f"{message} (instance dumped to {dump})")


@dataclass
class BenchConfig:
    seed: int = 0
    trials: int = 25
    vectors: int = 10_000
    n: int = 64
    t: int | None = None
    alpha: float = 0.25
    m: int = 1000
    alphabet: int = 4
    mode: str = "ops"
    mem_budget: int = DEFAULT_MEM_BUDGET
    algorithms: tuple[str, ...] = ("gdfv-tree",)
    dump_dir: str = "."

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in ("ops", "wall"):
            raise ValueError(f"mode must be 'ops' or 'wall', got {self.mode!r}")
        unknown = set(self.algorithms) - {"gdfv-tree", "gdfv-table"}
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")

    def width(self) -> int:
        return self.t if self.t is not None else block_width(self.n, self.alpha)


@dataclass
class BenchRecord:
    trial: int
    algorithm: str
    elapsed_ns: int
    comparisons: int
    tree_visits: int
    checksum: str

    def row(self) -> tuple:
        return (self.trial, self.algorithm, self.elapsed_ns, self.comparisons, self.tree_visits, self.checksum)


@dataclass
class BenchReport:
    mode: str
    records: list[BenchRecord] = field(default_factory=list)

    def ratios(self, algorithm: str) -> list[float]:
        """Per-trial throughput of ``algorithm`` relative to the trivial route."""
        by_trial = {}
        for r in self.records:
            by_trial.setdefault(r.trial, {})[r.algorithm] = r
        out = []
        for recs in by_trial.values():
            if algorithm not in recs or "trivial" not in recs:
                continue
            base, alt = recs["trivial"], recs[algorithm]
            if self.mode == "ops":
                out.append(base.comparisons / max(alt.comparisons, 1))
            else:
                out.append(base.elapsed_ns / max(alt.elapsed_ns, 1))
        return out

    def summary(self) -> list[tuple]:
        rows = []
        algs = sorted({r.algorithm for r in self.records} - {"trivial"})
        for alg in algs:
            xs = self.ratios(alg)
            if not xs:
                continue
            sd = statistics.pstdev(xs) if len(xs) > 1 else 0.0
            rows.append(("#summary", alg, self.mode, min(xs), statistics.median(xs),
                         statistics.fmean(xs), max(xs), sd))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            w.writerow(r.row())
        w.writerow(SUMMARY_HEADER)
        for row in self.summary():
            w.writerow([row[0], row[1], row[2]] + [f"{x:.6g}" for x in row[3:]])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# generators


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _uniform(rng, shape) -> np.ndarray:
    # random() is [0, 1); flip it onto (0, 1]
    return 1.0 - rng.random(shape)


def gen_random_matrix(m: int, n: int, seed) -> np.ndarray:
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be positive")
    return _uniform(_rng(seed), (m, n))


def gen_random_vector(n: int, seed) -> np.ndarray:
    if n < 1:
        raise ValueError("vector length must be positive")
    return _uniform(_rng(seed), n)


def gen_random_model(n: int, alphabet_size: int, seed) -> HiddenMarkovModel:
    if n < 1 or alphabet_size < 1:
        raise ValueError("model needs at least one state and one symbol")
    rng = _rng(seed)

    def rows(shape):
        x = _uniform(rng, shape)
        return x / x.sum(axis=-1, keepdims=True)

    initial = rows(n)
    transition = rows((n, n))
    emission = rows((n, alphabet_size))
    symbols = [f"a{i}" for i in range(alphabet_size)]
    return HiddenMarkovModel.create(symbols, initial, transition, emission)


# ---------------------------------------------------------------------------
# harness


def _close(a: np.ndarray, b: np.ndarray) -> bool:
    both_neg = np.isneginf(a) & np.isneginf(b)
    fin = ~both_neg
    if (np.isneginf(a[fin]) | np.isneginf(b[fin])).any():
        return False
    return bool(np.all(np.abs(a[fin] - b[fin]) <= REL_TOL * np.maximum(1.0, np.abs(b[fin]))))


def _checksum(chunks) -> str:
    crc = 0
    for values in chunks:
        crc = zlib.crc32(np.round(values, 6).tobytes(), crc)
    return f"{crc:08x}"


def _dump(config: BenchConfig, trial: int, A, b) -> str:
    path = Path(config.dump_dir) / f"mismatch-seed{config.seed}-trial{trial}.txt"
    path.write_text(format_matrix(A) + format_vector(b))
    return str(path)


def _timed(mode: str, fn):
    if mode == "wall":
        t0 = time.perf_counter_ns()
        out = fn()
        return out, time.perf_counter_ns() - t0
    return fn(), 0


def bench_mul(config: BenchConfig) -> BenchReport:
    """Stream ``vectors`` random vectors through an ``n x t`` matrix per trial."""
    n, t = config.n, config.width()
    report = BenchReport(config.mode)
    for trial in range(config.trials):
        rng = _rng([config.seed, trial])
        A = _uniform(rng, (n, t))
        V = _uniform(rng, (config.vectors, t))

        ref, ns = _timed(config.mode, lambda: [multiply_trivial(A, v).values for v in V])
        trial_records = [BenchRecord(trial, "trivial", ns, n * t * len(V), 0, _checksum(ref))]

        engines = []
        if "gdfv-tree" in config.algorithms:
            sm = preprocess_spliced(A, t, mem_budget=config.mem_budget)
            engines.append(("gdfv-tree", lambda v, st, sm=sm: multiply_spliced(sm, v, st)))
        if "gdfv-table" in config.algorithms:
            tm = preprocess_spliced_table(A, t)
            engines.append(("gdfv-table", lambda v, st, tm=tm: multiply_spliced_table(tm, v, st)))

        for name, mul in engines:
            stats = MulStats()
            got, ns = _timed(config.mode, lambda: [mul(v, stats).values for v in V])
            for k, (g, r) in enumerate(zip(got, ref)):
                if not _close(g, r):
                    raise CorrectnessError(
                        f"{name} disagrees with the trivial product in trial {trial}, vector {k}",
                        _dump(config, trial, A, V[k]))
            trial_records.append(BenchRecord(trial, name, ns, stats.work, stats.visits, _checksum(got)))
        report.records += trial_records
    return report


def bench_decode(config: BenchConfig) -> BenchReport:
    """Viterbi (``trivial``) against GDFV on random models and observations."""
    n, m = config.n, config.m
    report = BenchReport(config.mode)
    for trial in range(config.trials):
        rng = _rng([config.seed, trial])
        model_seed, obs_seed = rng.integers(0, 2**63, size=2)
        model = gen_random_model(n, config.alphabet, int(model_seed))
        obs = _rng(int(obs_seed)).integers(0, config.alphabet, size=m)

        (ref, _), ns = _timed(config.mode, lambda: viterbi_baseline(model, obs))
        ref_sum = _checksum([np.array([ref.log_prob])])
        trial_records = [BenchRecord(trial, "trivial", ns, (m - 1) * n * n, 0, ref_sum)]

        if "gdfv-tree" in config.algorithms:
            dec = gdfv_preprocess(model, config.alpha, mem_budget=config.mem_budget, t=config.t)
            stats = MulStats()
            (res, _), ns = _timed(config.mode, lambda: gdfv_decode(dec, obs, stats))
            _gate(config, trial, "gdfv-tree", res.log_prob, ref.log_prob)
            trial_records.append(BenchRecord(trial, "gdfv-tree", ns, stats.work, stats.visits,
                                             _checksum([np.array([res.log_prob])])))
        if "gdfv-table" in config.algorithms:
            stats = MulStats()
            res, ns = _timed(config.mode, lambda: gdfv_table_decode(model, obs, config.width(), stats=stats))
            _gate(config, trial, "gdfv-table", res.log_prob, ref.log_prob)
            trial_records.append(BenchRecord(trial, "gdfv-table", ns, stats.work, stats.visits,
                                             _checksum([np.array([res.log_prob])])))
        report.records += trial_records
    return report


def _gate(config, trial, name, got, want):
    if not _close(np.array([got]), np.array([want])):
        raise CorrectnessError(
            f"{name} log-probability {got!r} differs from Viterbi {want!r} "
            f"(seed {config.seed}, trial {trial}, n={config.n}, m={config.m})")
