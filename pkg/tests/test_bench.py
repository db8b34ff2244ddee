import csv
from fractions import Fraction

import numpy as np
import pytest

from fixedsr import bench
from fixedsr.evaluation import evaluate
from fixedsr.expr import depth_of


def test_catalog_ids_and_shapes():
    ids = [s.id for s in bench.catalog()]
    assert ids == [f"hemberg-{i}" for i in range(1, 6)] + [f"feynman-{i}" for i in range(1, 6)]
    depths = {s.id: s.depth for s in bench.catalog()}
    assert [depths[f"hemberg-{i}"] for i in range(1, 6)] == [4, 4, 5, 9, 10]
    assert [depths[f"feynman-{i}"] for i in range(1, 6)] == [4, 5, 6, 7, 8]
    assert bench.get_benchmark("feynman-2").num_inputs == 9
    assert bench.get_benchmark("feynman-5").num_inputs == 6


def test_hemberg_one_anchor():
    spec = bench.get_benchmark("hemberg-1")
    assert spec.ground_truth(np.array([[1.0, 1.0]]))[0] == 2.0


@pytest.mark.parametrize("spec", bench.catalog(), ids=lambda s: s.id)
def test_canonical_encoding_reproduces_ground_truth(spec):
    seq = spec.canonical_seq()
    assert depth_of(seq) == (spec.depth, True)
    assert seq.num_constants == len(spec.constants)
    data = bench.sample_dataset(spec, np.random.default_rng(0), 64)
    pred = evaluate(seq, data, np.array(spec.constants))
    np.testing.assert_allclose(pred, data.y, rtol=1e-10, atol=1e-10)


def test_feature_row():
    depth, n_in, avg = bench.feature_row(bench.get_benchmark("hemberg-1"))
    # 8 / (2 + x^2 + y^2) as a depth-4 tree has 11 nodes
    assert (depth, n_in, avg) == (4, 2, Fraction(11, 5))
    assert bench.feature_row(bench.get_benchmark("feynman-5"))[:2] == (8, 6)


def test_sampling_box_and_size():
    spec = bench.get_benchmark("feynman-1")
    ds = bench.sample_dataset(spec, np.random.default_rng(1), 500)
    assert ds.X.shape == (500, 5)
    assert ds.X.min() >= 1.0 and ds.X.max() <= 5.0
    assert np.all(np.isfinite(ds.y))
    assert bench.sample_dataset(bench.get_benchmark("hemberg-2"), np.random.default_rng(0)).n == 20


def test_sampling_is_seeded():
    spec = bench.get_benchmark("hemberg-3")
    a = bench.sample_dataset(spec, np.random.default_rng(7))
    b = bench.sample_dataset(spec, np.random.default_rng(7))
    np.testing.assert_array_equal(a.X, b.X)


def test_unknown_benchmark():
    with pytest.raises(KeyError):
        bench.get_benchmark("hemberg-9")


def test_parse_suite_config():
    cfg = bench.parse_suite_config("""
        # desk run
        benchmarks = hemberg-1, feynman-1
        algorithms = gp, random
        runs = 3
        budget_seconds = none
        max_iterations = 100
        suite_id = demo
    """)
    assert cfg.benchmarks == ("hemberg-1", "feynman-1")
    assert cfg.algorithms == ("gp", "random")
    assert cfg.runs == 3 and cfg.budget_seconds is None and cfg.suite_id == "demo"


@pytest.mark.parametrize("text", [
    "runs = 2",
    "benchmarks =",
    "benchmarks = nope-1",
    "benchmarks = hemberg-1\ncolour = blue",
    "benchmarks = hemberg-1\nalgorithms = annealing",
    "benchmarks hemberg-1",
])
def test_bad_suite_configs(text):
    with pytest.raises((ValueError, KeyError)):
        bench.parse_suite_config(text)


def test_aggregate_uses_population_std():
    mean, std = bench.aggregate([1.0, 3.0])
    assert (mean, std) == (2.0, 1.0)


def test_small_time_free_suite(tmp_path):
    cfg = bench.SuiteConfig(
        benchmarks=("hemberg-1", "hemberg-2"), algorithms=("random", "sa"), runs=2,
        budget_seconds=None, max_iterations=60, sample_interval=20, suite_id="t",
    )
    result = bench.run_suite(cfg, tmp_path)
    assert not result.failures
    files = sorted(p.name for p in result.out_dir.glob("*__run*.csv"))
    assert len(files) == 2 * 2 * 2 * 2
    with (result.out_dir / "summary.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == bench.SUMMARY_COLUMNS
    recomputed = bench.recompute_summary(result.out_dir)
    for row in rows:
        mean, std, n = recomputed[(row["benchmark"], row["algorithm"], row["notation"])]
        assert float(row["mean_final_mse"]) == mean
        assert float(row["std_final_mse"]) == std
        assert int(row["runs"]) == n == 2
    # same seed, same files
    again = bench.run_suite(bench.with_overrides(cfg, suite_id="t2"), tmp_path)
    for name in files:
        assert (result.out_dir / name).read_bytes() == (again.out_dir / name).read_bytes()
    assert (result.out_dir / "summary.csv").read_bytes() == (again.out_dir / "summary.csv").read_bytes()


def test_failed_runs_are_excluded(tmp_path, monkeypatch, caplog):
    real = bench.run_search

    def flaky(scfg, table, data):
        if scfg.algorithm == "sa":
            raise RuntimeError("boom")
        return real(scfg, table, data)

    monkeypatch.setattr(bench, "run_search", flaky)
    cfg = bench.SuiteConfig(benchmarks=("hemberg-1",), algorithms=("random", "sa"),
                            notations=("postfix",), runs=2, budget_seconds=None,
                            max_iterations=20, sample_interval=10)
    result = bench.run_suite(cfg, tmp_path)
    assert len(result.failures) == 2
    by_alg = {r["algorithm"]: r for r in result.rows}
    assert by_alg["sa"]["runs"] == 0 and by_alg["random"]["runs"] == 2
    assert "boom" in caplog.text
