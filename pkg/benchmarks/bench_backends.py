"""Wall-clock comparison of the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_backends.py [--repeat 3]

Each case is timed after one warm-up call so JIT compilation is excluded.
"""

import argparse
import time

import numpy as np

from gdfv import (
    PointSet,
    build_tree,
    gdfv_decode,
    gdfv_preprocess,
    multiply_spliced,
    preprocess_spliced,
    use_backend,
    viterbi_baseline,
)
from gdfv.bench import gen_random_model


def cases(rng):
    pts = PointSet.from_real(rng.random((2048, 3)))
    yield "build tree (2048 pts, d=3)", lambda: build_tree(pts)

    A = 1.0 - rng.random((512, 512))
    yield "preprocess 512x512, t=3", lambda: preprocess_spliced(A, 3)

    sm = preprocess_spliced(A, 3)
    V = 1.0 - rng.random((50, 512))
    yield "50 products 512x512, t=3", lambda: [multiply_spliced(sm, v) for v in V]

    model = gen_random_model(128, 4, 0)
    obs = rng.integers(0, 4, 500)
    yield "viterbi n=128, m=500", lambda: viterbi_baseline(model, obs)

    dec = gdfv_preprocess(model, t=2)
    yield "gdfv decode n=128, m=500, t=2", lambda: gdfv_decode(dec, obs)


def best_of(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"{'case':36s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, fn in cases(np.random.default_rng(args.seed)):
        t = {}
        for backend in ("numba", "numpy"):
            with use_backend(backend):
                t[backend] = best_of(fn, args.repeat)
        print(f"{name:36s} {t['numba']:10.4f} {t['numpy']:10.4f} {t['numpy'] / t['numba']:8.1f}x")


if __name__ == "__main__":
    main()
