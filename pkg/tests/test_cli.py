import csv

import numpy as np
import pytest

from fixedsr.cli import main
from fixedsr.evaluation import Dataset, save_dataset


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_depth_figure_example(capsys):
    code, out, _ = run(capsys, "depth", "--notation", "prefix", "--expr", "+ cos + x1 x2 + x1 x2")
    assert code == 0 and out.strip() == "3 complete"


def test_depth_partial(capsys):
    code, out, _ = run(capsys, "depth", "--notation", "postfix", "--expr", "x1 x2")
    assert out.strip() == "0 incomplete"


def test_enumerate_depth_one(capsys):
    code, out, _ = run(capsys, "enumerate", "--depth", "1", "--binary", "+", "--vars", "1")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "#notation: prefix"
    assert sorted(lines[1:]) == sorted(["+ x1 x1", "+ x1 const", "+ const x1", "+ const const"])


def test_enumerate_limit(capsys):
    code, _, err = run(capsys, "enumerate", "--depth", "3", "--binary", "+,*", "--limit", "5")
    assert code == 1 and "more than 5" in err


def test_convert_round_trip(capsys, tmp_path):
    text = "+ cos + x1 x2 * const x2"
    _, out, _ = run(capsys, "convert", "--notation", "prefix", "--expr", text)
    path = tmp_path / "post.txt"
    path.write_text(out)
    code, back, _ = run(capsys, "convert", "--file", str(path))
    assert code == 0 and back.splitlines() == ["#notation: prefix", text]


def test_gen_is_seeded(capsys):
    args = ("gen", "--depth", "3", "--count", "5", "--ops", "feynman", "--vars", "2", "--seed", "4")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b and len(a.splitlines()) == 6


def test_eval(capsys, tmp_path):
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    save_dataset(Dataset(X, X[:, 0] * 2.0), tmp_path / "d.csv")
    code, out, _ = run(capsys, "eval", "--notation", "prefix", "--expr", "* const x1",
                       "--data", str(tmp_path / "d.csv"), "--consts", "2")
    assert code == 0 and out.strip() == "mse 0 score 1"


def test_malformed_expression_exits_2(capsys):
    code, _, err = run(capsys, "depth", "--notation", "prefix", "--expr", "+ x1 bogus")
    assert code == 2 and "position 2" in err


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "search", "--algo", "gp")[0] == 2
    assert run(capsys, "search", "--algo", "gp", "--depth", "2", "--data", "/no/such.csv")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "depth", "--expr", "x1")[0] == 2


def test_search_writes_trace(capsys, tmp_path):
    out = tmp_path / "trace.csv"
    code, text, _ = run(capsys, "search", "--algo", "random", "--depth", "0", "--benchmark",
                        "hemberg-1", "--time-free", "--max-iterations", "30",
                        "--sample-interval", "10", "--out", str(out))
    assert code == 0 and "mse:" in text
    rows = list(csv.DictReader(out.open()))
    assert [r["kind"] for r in rows] == ["sample"] * 3 + ["final"]


def test_search_uses_results_env(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("FIXEDSR_RESULTS_DIR", str(tmp_path / "res"))
    code, _, _ = run(capsys, "search", "--algo", "sa", "--depth", "1", "--benchmark", "hemberg-1",
                     "--time-free", "--max-iterations", "10", "--sample-interval", "5")
    assert code == 0
    assert len(list((tmp_path / "res").glob("*.csv"))) == 1


def test_bench_empty_list_exits_2(capsys, tmp_path):
    cfg = tmp_path / "suite.cfg"
    cfg.write_text("benchmarks =\n")
    assert run(capsys, "bench", "--config", str(cfg))[0] == 2


def test_bench_desk_config(capsys, tmp_path):
    cfg = tmp_path / "suite.cfg"
    cfg.write_text("benchmarks = hemberg-1\nalgorithms = random\nruns = 2\n"
                   "budget_seconds = none\nmax_iterations = 20\nsample_interval = 10\n")
    code, out, _ = run(capsys, "bench", "--config", str(cfg), "--out-dir", str(tmp_path / "o"))
    assert code == 0 and (tmp_path / "o" / "suite" / "summary.csv").exists()


def test_unsatisfiable_grammar_exits_1(capsys, tmp_path):
    X = np.array([[1.0], [2.0]])
    save_dataset(Dataset(X, X[:, 0]), tmp_path / "d.csv")
    code, _, err = run(capsys, "search", "--algo", "random", "--depth", "2", "--data",
                       str(tmp_path / "d.csv"), "--binary", "", "--time-free",
                       "--max-iterations", "5")
    assert code == 1 and "operator" in err
