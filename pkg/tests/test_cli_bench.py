import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest

from gdfv import bench
from gdfv.bench import (
    CSV_HEADER,
    BenchConfig,
    CorrectnessError,
    bench_decode,
    bench_mul,
    gen_random_matrix,
    gen_random_model,
    gen_random_vector,
)
from gdfv.cli import main
from gdfv.maxplus import multiply_trivial

from test_textio import EXAMPLE_MODEL

EXAMPLE_LOGP = math.log(0.5 * 0.9 * 0.1 * 0.8 * 0.9**4)


@pytest.fixture
def example_files(tmp_path):
    model = tmp_path / "model.txt"
    obs = tmp_path / "obs.txt"
    model.write_text(EXAMPLE_MODEL)
    obs.write_text("a a b b\n")
    return str(model), str(obs)


def rows_of(text):
    return [r for r in csv.reader(io.StringIO(text))]


# ---------------------------------------------------------------------------
# generators


def test_generators():
    m = gen_random_model(1, 1, 7)
    assert m.initial.tolist() == [1.0] and m.transition.tolist() == [[1.0]] and m.emission.tolist() == [[1.0]]
    m = gen_random_model(2, 2, 42)
    np.testing.assert_allclose(m.transition.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(m.emission.sum(axis=1), 1.0, atol=1e-9)
    m2 = gen_random_model(2, 2, 42)
    np.testing.assert_array_equal(m.transition, m2.transition)
    a = gen_random_matrix(1, 1, 3)
    assert a.shape == (1, 1) and 0 < a[0, 0] <= 1
    np.testing.assert_array_equal(gen_random_matrix(30, 30, 5), gen_random_matrix(30, 30, 5))
    big = gen_random_matrix(200, 200, 1)
    assert (big > 0).all() and (big <= 1).all() and np.isfinite(big).all()
    v = gen_random_vector(50, 2)
    assert (v > 0).all() and (v <= 1).all()


# ---------------------------------------------------------------------------
# harness


def test_bench_mul_ratio_is_work_ratio():
    report = bench_mul(BenchConfig(seed=1, trials=2, vectors=10, n=64, t=2))
    recs = {(r.trial, r.algorithm): r for r in report.records}
    for trial in range(2):
        triv, tree = recs[trial, "trivial"], recs[trial, "gdfv-tree"]
        assert triv.comparisons == 64 * 2 * 10
        assert triv.checksum == tree.checksum
        assert tree.tree_visits > 0 and tree.comparisons > tree.tree_visits
    ratios = report.ratios("gdfv-tree")
    assert all(r > 0 for r in ratios)
    assert ratios[0] == recs[0, "trivial"].comparisons / recs[0, "gdfv-tree"].comparisons


def test_bench_mul_deterministic():
    cfg = BenchConfig(seed=9, trials=3, vectors=20, n=32, t=3, algorithms=("gdfv-tree", "gdfv-table"))
    assert bench_mul(cfg).to_csv() == bench_mul(cfg).to_csv()


def test_bench_mul_width_one_ratio_near_one():
    report = bench_mul(BenchConfig(seed=0, trials=2, vectors=5, n=64, t=1))
    for r in report.ratios("gdfv-tree"):
        assert 0.25 < r <= 1.0


def test_bench_csv_schema():
    text = bench_mul(BenchConfig(seed=0, trials=2, vectors=3, n=16, t=2)).to_csv()
    rows = rows_of(text)
    assert tuple(rows[0]) == CSV_HEADER
    summary = [r for r in rows if r[0] == "#summary"]
    assert summary[0][1:] == ["algorithm", "mode", "min", "median", "mean", "max", "stddev"]
    assert summary[1][:3] == ["#summary", "gdfv-tree", "ops"]
    data = [r for r in rows[1:] if not r[0].startswith("#")]
    assert len(data) == 4 and all(r[2] == "0" for r in data)


def test_bench_wall_mode_times():
    report = bench_mul(BenchConfig(seed=0, trials=1, vectors=3, n=16, t=2, mode="wall"))
    assert all(r.elapsed_ns > 0 for r in report.records)


def test_bench_decode():
    cfg = BenchConfig(seed=3, trials=2, n=64, m=100)
    report = bench_decode(cfg)
    assert len(report.summary()) == 1
    assert bench_decode(cfg).to_csv() == report.to_csv()
    tiny = bench_decode(BenchConfig(seed=0, trials=2, n=2, m=50))
    assert tiny.summary()[0][1] == "gdfv-tree"


def test_correctness_gate_aborts_and_dumps(tmp_path, monkeypatch):
    def broken(A, b):
        r = multiply_trivial(A, b)
        r.values[0] += 1.0
        return r

    monkeypatch.setattr(bench, "multiply_trivial", broken)
    with pytest.raises(CorrectnessError) as exc:
        bench_mul(BenchConfig(seed=0, trials=1, vectors=2, n=8, t=2, dump_dir=str(tmp_path)))
    assert exc.value.dump and (tmp_path / "mismatch-seed0-trial0.txt").exists()


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(trials=0)
    with pytest.raises(ValueError):
        BenchConfig(mode="cycles")
    with pytest.raises(ValueError):
        BenchConfig(algorithms=("quantum",))


# ---------------------------------------------------------------------------
# cli


def test_decode_example(example_files, capsys):
    outputs = []
    for alg in ("viterbi", "gdfv", "gdfv-table", "brute"):
        assert main(["decode", *example_files, "--algorithm", alg]) == 0
        outputs.append(capsys.readouterr().out)
    lines = outputs[0].splitlines()
    assert lines[0] == "1 1 2 2"
    assert float(lines[1].split()[1]) == pytest.approx(EXAMPLE_LOGP, abs=1e-12)
    assert outputs[0] == outputs[1]


def test_decode_missing_file(example_files, capsys, tmp_path):
    missing = str(tmp_path / "nope.txt")
    assert main(["decode", missing, example_files[1]]) != 0
    assert missing in capsys.readouterr().err


def test_decode_parse_error(example_files, capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text(EXAMPLE_MODEL.replace("0.9 0.1\n0.2 0.8", "0.9 zz\n0.2 0.8"))
    assert main(["decode", str(bad), example_files[1]]) != 0
    assert f"{bad}:4:5:" in capsys.readouterr().err


def test_decode_invalid_model(example_files, capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text(EXAMPLE_MODEL.replace("0.2 0.8", "0.3 0.8"))
    assert main(["decode", str(bad), example_files[1]]) != 0
    assert "transition row 2" in capsys.readouterr().err
    assert main(["decode", str(bad), example_files[1], "--renormalize"]) == 0


def test_gen_model_then_decode(tmp_path, capsys):
    path = tmp_path / "m.txt"
    assert main(["gen-model", "--n", "5", "--alphabet", "3", "--seed", "4", "--out", str(path)]) == 0
    obs = tmp_path / "o.txt"
    obs.write_text("a0 a2 a1 a1 a0 a2\n")
    outs = []
    for alg in ("viterbi", "gdfv", "brute"):
        assert main(["decode", str(path), str(obs), "--algorithm", alg, "--t", "2"]) == 0
        outs.append(capsys.readouterr().out.splitlines()[0])
    assert len(set(outs)) == 1


def test_bench_cli_writes_csv(tmp_path):
    out = tmp_path / "mul.csv"
    assert main(["bench-mul", "--n", "32", "--t", "2", "--trials", "2", "--vectors", "5",
                 "--algorithm", "gdfv", "--algorithm", "gdfv-table", "--out", str(out)]) == 0
    rows = rows_of(out.read_text())
    assert tuple(rows[0]) == CSV_HEADER
    assert {r[1] for r in rows[1:] if r[0] != "#summary"} == {"trivial", "gdfv-tree", "gdfv-table"}
    out2 = tmp_path / "dec.csv"
    assert main(["bench-decode", "--n", "16", "--m", "40", "--trials", "2", "--out", str(out2)]) == 0
    assert rows_of(out2.read_text())[0] == list(CSV_HEADER)


def test_module_entry_point(example_files):
    proc = subprocess.run([sys.executable, "-m", "gdfv", "decode", *example_files],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("1 1 2 2\n")
