"""Command line: ``gdfv {decode,bench-mul,bench-decode,gen-model}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, textio
from ._forest import DEFAULT_MEM_BUDGET, MemoryBudgetError
from .hmm import InvalidModelError, brute_force_decode, gdfv_decode, gdfv_preprocess, gdfv_table_decode, viterbi_baseline


def _common(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int, default=64, help="rows / states")
    p.add_argument("--t", type=int, default=None, help="block width (default: from --alpha)")
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("ops", "wall"), default="ops")
    p.add_argument("--mem-budget", type=int, default=DEFAULT_MEM_BUDGET, help="bytes")
    p.add_argument("--algorithm", action="append", choices=("gdfv", "gdfv-table"),
                   help="engines to compare with the trivial route (repeatable; default gdfv)")
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdfv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decode", help="decode an observation file")
    d.add_argument("model")
    d.add_argument("obs")
    d.add_argument("--algorithm", choices=("viterbi", "gdfv", "gdfv-table", "brute"), default="gdfv")
    d.add_argument("--alpha", type=float, default=0.25)
    d.add_argument("--t", type=int, default=None)
    d.add_argument("--mem-budget", type=int, default=DEFAULT_MEM_BUDGET)
    d.add_argument("--renormalize", action="store_true", help="rescale model rows instead of rejecting them")

    bm = sub.add_parser("bench-mul", help="multiplication throughput: n x t matrix, many vectors")
    _common(bm)
    bm.add_argument("--vectors", type=int, default=10_000)

    bd = sub.add_parser("bench-decode", help="Viterbi vs GDFV on random models")
    _common(bd)
    bd.add_argument("--m", type=int, default=1000, help="observation length")
    bd.add_argument("--alphabet", type=int, default=4)

    g = sub.add_parser("gen-model", help="write a random model file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--alphabet", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    return parser


def _write(out: str, text: str):
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _algorithms(args) -> tuple[str, ...]:
    chosen = args.algorithm or ["gdfv"]
    return tuple("gdfv-tree" if a == "gdfv" else a for a in chosen)


def cmd_decode(args) -> int:
    model = textio.parse_model(textio.read_text(args.model), where=args.model, renormalize=args.renormalize)
    obs = textio.parse_observations(textio.read_text(args.obs), model, where=args.obs)
    if args.algorithm == "viterbi":
        result, _ = viterbi_baseline(model, obs)
    elif args.algorithm == "brute":
        result = brute_force_decode(model, obs)
    elif model.n < 2:
        # one state: every decoder returns the only path
        result, _ = viterbi_baseline(model, obs)
    elif args.algorithm == "gdfv":
        result, _ = gdfv_decode(gdfv_preprocess(model, args.alpha, args.mem_budget, t=args.t), obs)
    else:
        t = args.t if args.t is not None else bench.block_width(model.n, args.alpha)
        result = gdfv_table_decode(model, obs, t)
    sys.stdout.write(textio.format_decode(result))
    return 0


def cmd_bench(args, which) -> int:
    config = bench.BenchConfig(
        seed=args.seed, trials=args.trials, n=args.n, t=args.t, alpha=args.alpha,
        mode=args.mode, mem_budget=args.mem_budget, algorithms=_algorithms(args),
        vectors=getattr(args, "vectors", 10_000), m=getattr(args, "m", 1000),
        alphabet=getattr(args, "alphabet", 4),
        dump_dir=str(Path(args.out).parent) if args.out != "-" else ".",
    )
    report = which(config)
    _write(args.out, report.to_csv())
    return 0


def cmd_gen_model(args) -> int:
    model = bench.gen_random_model(args.n, args.alphabet, args.seed)
    _write(args.out, textio.format_model(model))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "decode":
            return cmd_decode(args)
        if args.command == "bench-mul":
            return cmd_bench(args, bench.bench_mul)
        if args.command == "bench-decode":
            return cmd_bench(args, bench.bench_decode)
        return cmd_gen_model(args)
    except FileNotFoundError as exc:
        print(f"gdfv: no such file: {exc.filename}", file=sys.stderr)
        return 2
    except textio.ParseError as exc:
        print(f"gdfv: parse error: {exc}", file=sys.stderr)
        return 2
    except InvalidModelError as exc:
        print(f"gdfv: invalid model: {exc}", file=sys.stderr)
        return 2
    except (MemoryBudgetError, bench.CorrectnessError, ValueError) as exc:
        print(f"gdfv: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
