"""Benchmark catalog (Hemberg and Feynman ground truths), dataset sampling,
multi-run suites and CSV export."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from .evaluation import Dataset, FitConfig
from .expr import PREFIX, ExpressionSeq, parse_expression, tree_stats
from .search import ALGORITHMS, SearchConfig, read_trace_csv, run_search
from .tokens import TokenTable

log = logging.getLogger(__name__)

HEMBERG_BINARY = ("+", "-", "*", "/", "^")
FEYNMAN_UNARY = ("sin", "sqrt", "cos")


def operator_table(operator_set: str, num_inputs: int) -> TokenTable:
    if operator_set == "hemberg":
        return TokenTable((), HEMBERG_BINARY, num_inputs, True)
    if operator_set == "feynman":
        return TokenTable(FEYNMAN_UNARY, HEMBERG_BINARY, num_inputs, True)
    raise ValueError(f"unknown operator set {operator_set!r}")


@dataclass(frozen=True)
class BenchmarkSpec:
    id: str
    formula: str
    ground_truth: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    depth: int
    num_inputs: int
    low: float
    high: float
    num_samples: int
    operator_set: str
    # canonical tree in prefix text; literal constants are spelled ``const``
    # and their values listed in ``constants`` (left-to-right)
    canonical: str = field(repr=False)
    constants: tuple[float, ...] = field(repr=False, default=())

    @property
    def table(self) -> TokenTable:
        return operator_table(self.operator_set, self.num_inputs)

    def canonical_seq(self) -> ExpressionSeq:
        return parse_expression(self.canonical, PREFIX, self.table)


# Column conventions: x1 = x, x2 = y for Hemberg. Feynman inputs are numbered
# in the order listed in each formula comment.

def _h1(X):
    x, y = X[:, 0], X[:, 1]
    return 8.0 / (2.0 + x**2 + y**2)


def _h2(X):
    x, y = X[:, 0], X[:, 1]
    return x**3 * (x - 1.0) + y * (y / 2.0 - 1.0)


def _h3(X):
    x, y = X[:, 0], X[:, 1]
    return x**3 / 5.0 + y**3 / 2.0 - y - x


def _h4(X):
    x, y = X[:, 0], X[:, 1]
    return (30.0 * x**2 / ((10.0 - x) * y**2) + x**4 - x**3 + y**2 / 2.0 - y
            + 8.0 / (2.0 + x**2 + y**2) + x)


def _h5(X):
    x, y = X[:, 0], X[:, 1]
    return (30.0 * x**2 / ((10.0 - x) * y**2) + x**4 - 4.0 / 5.0 * x**3 + y**2 / 2.0 - 2.0 * y
            + 8.0 / (2.0 + x**2 + y**2) + y**3 / 2.0 - x)


def _f1(X):
    # q, E_f, m, omega_0, omega
    q, ef, m, w0, w = X.T
    return q * ef / (m * (w0**2 - w**2))


def _f2(X):
    # G, m1, m2, x1, x2, y1, y2, z1, z2
    G, m1, m2, x1, x2, y1, y2, z1, z2 = X.T
    return G * m1 * m2 / ((x2 - x1) ** 2 + (y2 - y1) ** 2 + (z2 - z1) ** 2)


def _f3(X):
    # Z1, Z2, alpha, hbar, c, E_n, theta
    z1, z2, alpha, hbar, c, en, theta = X.T
    return (z1 * z2 * alpha * hbar * c / (4.0 * en * np.sin(theta / 2.0) ** 2)) ** 2


def _f4(X):
    # mu_m, H, k_b, T, alpha, epsilon, c, M
    mu, H, kb, T, alpha, eps, c, M = X.T
    return mu * H / (kb * T) + mu * alpha / (eps * c**2 * kb * T) * M


def _f5(X):
    # m, k_G, L, E_n, theta1, theta2
    m, kg, L, en, t1, t2 = X.T
    return m * kg / L**2 * (1.0 + np.sqrt(1.0 + 2.0 * en * L**2 / (m * kg**2)) * np.cos(t1 - t2))


# Sum chains associate to the left, which is what the depth column requires.
_H1 = "/ const + + const ^ x1 const ^ x2 const"
_H2 = "+ * ^ x1 const - x1 const * x2 - / x2 const const"
_H3 = "- - + / ^ x1 const const / ^ x2 const const x2 x1"
_T1 = "/ * const ^ x1 const * - const x1 ^ x2 const"
_T6 = "/ const + + const ^ x1 const ^ x2 const"
_H4 = f"+ + - + - + {_T1} ^ x1 const ^ x1 const / ^ x2 const const x2 {_T6} x1"
_H5 = (f"- + + - + - + {_T1} ^ x1 const * / const const ^ x1 const / ^ x2 const const"
       f" * const x2 {_T6} / ^ x2 const const x1")

_F1 = "/ * x1 x2 * x3 - ^ x4 const ^ x5 const"
_F2 = "/ * * x1 x2 x3 + + ^ - x5 x4 const ^ - x7 x6 const ^ - x9 x8 const"
_F3 = "^ / * * * * x1 x2 x3 x4 x5 * * const x6 ^ sin / x7 const const const"
_F4 = "+ / * x1 x2 * x3 x4 * / * x1 x5 * * * x6 ^ x7 const x3 x4 x8"
_F5 = ("* / * x1 x2 ^ x3 const + const * sqrt + const / * * const x4 ^ x3 const"
       " * x1 ^ x2 const cos - x5 x6")

_T1_C = (30.0, 2.0, 10.0, 2.0)
_T6_C = (8.0, 2.0, 2.0, 2.0)

CATALOG: tuple[BenchmarkSpec, ...] = (
    BenchmarkSpec("hemberg-1", "8/(2+x^2+y^2)", _h1, 4, 2, -3.0, 3.0, 20, "hemberg",
                  _H1, (8.0, 2.0, 2.0, 2.0)),
    BenchmarkSpec("hemberg-2", "x^3*(x-1)+y*(y/2-1)", _h2, 4, 2, -3.0, 3.0, 20, "hemberg",
                  _H2, (3.0, 1.0, 2.0, 1.0)),
    BenchmarkSpec("hemberg-3", "x^3/5+y^3/2-y-x", _h3, 5, 2, -3.0, 3.0, 20, "hemberg",
                  _H3, (3.0, 5.0, 3.0, 2.0)),
    BenchmarkSpec("hemberg-4", "30*x^2/((10-x)*y^2)+x^4-x^3+y^2/2-y+8/(2+x^2+y^2)+x",
                  _h4, 9, 2, -3.0, 3.0, 20, "hemberg",
                  _H4, _T1_C + (4.0, 3.0, 2.0, 2.0) + _T6_C),
    BenchmarkSpec("hemberg-5",
                  "30*x^2/((10-x)*y^2)+x^4-4/5*x^3+y^2/2-2*y+8/(2+x^2+y^2)+y^3/2-x",
                  _h5, 10, 2, -3.0, 3.0, 20, "hemberg",
                  _H5, _T1_C + (4.0, 4.0, 5.0, 3.0, 2.0, 2.0, 2.0) + _T6_C + (3.0, 2.0)),
    BenchmarkSpec("feynman-1", "q*E_f/(m*(omega_0^2-omega^2))", _f1, 4, 5, 1.0, 5.0, 100_000,
                  "feynman", _F1, (2.0, 2.0)),
    BenchmarkSpec("feynman-2", "G*m1*m2/((x2-x1)^2+(y2-y1)^2+(z2-z1)^2)", _f2, 5, 9, 1.0, 5.0,
                  100_000, "feynman", _F2, (2.0, 2.0, 2.0)),
    BenchmarkSpec("feynman-3", "(Z1*Z2*alpha*hbar*c/(4*E_n*sin(theta/2)^2))^2", _f3, 6, 7,
                  1.0, 5.0, 100_000, "feynman", _F3, (4.0, 2.0, 2.0, 2.0)),
    BenchmarkSpec("feynman-4", "mu_m*H/(k_b*T)+mu_m*alpha/(epsilon*c^2*k_b*T)*M", _f4, 7, 8,
                  1.0, 5.0, 100_000, "feynman", _F4, (2.0,)),
    BenchmarkSpec("feynman-5",
                  "m*k_G/L^2*(1+sqrt(1+2*E_n*L^2/(m*k_G^2))*cos(theta1-theta2))", _f5, 8, 6,
                  1.0, 5.0, 100_000, "feynman", _F5, (2.0, 1.0, 1.0, 2.0, 2.0, 2.0)),
)

_BY_ID = {spec.id: spec for spec in CATALOG}


def catalog() -> list[BenchmarkSpec]:
    return list(CATALOG)


def get_benchmark(bench_id: str) -> BenchmarkSpec:
    try:
        return _BY_ID[bench_id]
    except KeyError:
        raise KeyError(f"unknown benchmark {bench_id!r}; choose from {sorted(_BY_ID)}") from None


def sample_dataset(spec: BenchmarkSpec, rng: np.random.Generator, n: int | None = None,
                   max_retries: int = 100) -> Dataset:
    """Uniform inputs on the spec's box; rows with non-finite labels are redrawn."""
    n = spec.num_samples if n is None else n
    if n < 1:
        raise ValueError("sample count must be >= 1")
    X = rng.uniform(spec.low, spec.high, size=(n, spec.num_inputs))
    with np.errstate(all="ignore"):
        y = spec.ground_truth(X)
    for _ in range(max_retries):
        bad = ~np.isfinite(y)
        if not bad.any():
            break
        X[bad] = rng.uniform(spec.low, spec.high, size=(int(bad.sum()), spec.num_inputs))
        with np.errstate(all="ignore"):
            y = spec.ground_truth(X)
    else:
        if not np.all(np.isfinite(y)):
            raise RuntimeError(f"{spec.id}: could not draw finite labels")
    return Dataset(X, y)


def feature_row(spec: BenchmarkSpec) -> tuple[int, int, Fraction]:
    """(depth, input count, average nodes per layer) of the canonical ground truth."""
    _, depth, avg = tree_stats(spec.canonical_seq())
    return depth, spec.num_inputs, avg


# -- suites -----------------------------------------------------------------

@dataclass(frozen=True)
class SuiteConfig:
    benchmarks: tuple[str, ...]
    algorithms: tuple[str, ...] = ALGORITHMS
    notations: tuple[str, ...] = ("prefix", "postfix")
    runs: int = 50
    budget_seconds: float | None = 120.0
    sample_interval: float = 6.0
    seed: int = 0
    max_iterations: int | None = None
    n_iter: int = 50_000
    samples: int | None = None  # dataset size override
    population: int = 2000
    parallelism: int = 1
    suite_id: str = "suite"

    def __post_init__(self):
        if not self.benchmarks:
            raise ValueError("no benchmarks selected")
        for b in self.benchmarks:
            get_benchmark(b)
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        if not self.algorithms or not self.notations:
            raise ValueError("need at least one algorithm and one notation")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


_LIST_KEYS = {"benchmarks", "algorithms", "notations"}
_INT_KEYS = {"runs", "seed", "max_iterations", "n_iter", "samples", "population", "parallelism"}
_FLOAT_KEYS = {"budget_seconds", "sample_interval"}


def parse_suite_config(text: str) -> SuiteConfig:
    """``key = value`` lines; ``#`` starts a comment; lists are comma separated."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not sep:
            raise ValueError(f"line {lineno}: expected key = value")
        if key in _LIST_KEYS:
            values[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in _INT_KEYS:
            values[key] = None if value.lower() == "none" else int(value)
        elif key in _FLOAT_KEYS:
            values[key] = None if value.lower() == "none" else float(value)
        elif key == "suite_id":
            values[key] = value
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    if "benchmarks" not in values:
        raise ValueError("config needs a 'benchmarks' entry")
    return SuiteConfig(**values)


@dataclass
class RunOutcome:
    benchmark: str
    algorithm: str
    notation: str
    run: int
    path: Path | None
    final_mse: float | None
    samples: list[tuple[float, float]]
    error: str | None = None


def _run_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def suite_dataset(cfg: SuiteConfig, bench_index: int) -> Dataset:
    spec = get_benchmark(cfg.benchmarks[bench_index])
    rng = np.random.default_rng(_run_seed(cfg.seed, bench_index))
    return sample_dataset(spec, rng, cfg.samples)


def _execute(job) -> RunOutcome:
    cfg, bi, ai, ni, r, out_dir = job
    bench_id, alg, notation = cfg.benchmarks[bi], cfg.algorithms[ai], cfg.notations[ni]
    spec = get_benchmark(bench_id)
    try:
        data = suite_dataset(cfg, bi)
        scfg = SearchConfig(
            algorithm=alg, notation=notation, depth=spec.depth, n_iter=cfg.n_iter,
            time_budget=cfg.budget_seconds, max_iterations=cfg.max_iterations,
            sample_interval=cfg.sample_interval, seed=_run_seed(cfg.seed, bi, ai, ni, r),
            population=cfg.population, fit=FitConfig(),
        )
        trace = run_search(scfg, spec.table, data)
        run_id = f"{bench_id}__{alg}__{notation}__run{r}"
        path = Path(out_dir) / f"{run_id}.csv"
        path.write_text(trace.to_csv(run_id))
        return RunOutcome(bench_id, alg, notation, r, path, trace.best_mse, trace.samples)
    except Exception as exc:  # a crashed run is reported, not fatal
        return RunOutcome(bench_id, alg, notation, r, None, None, [], f"{type(exc).__name__}: {exc}")


@dataclass
class SuiteResult:
    config: SuiteConfig
    out_dir: Path
    outcomes: list[RunOutcome]
    rows: list[dict]

    @property
    def failures(self) -> list[RunOutcome]:
        return [o for o in self.outcomes if o.error is not None]


SUMMARY_COLUMNS = ("benchmark", "algorithm", "notation", "depth", "input_count",
                   "avg_nodes_per_layer", "mean_final_mse", "std_final_mse", "runs")


def aggregate(final_mses) -> tuple[float, float]:
    """Mean and population standard deviation."""
    a = np.asarray(final_mses, dtype=np.float64)
    with np.errstate(all="ignore"):
        return float(a.mean()), float(a.std())


def mean_trace(traces: list[list[tuple[float, float]]]) -> list[tuple[float, float]]:
    """Pointwise mean of traces sampled on a common time grid."""
    if not traces:
        return []
    n = min(len(t) for t in traces)
    out = []
    for i in range(n):
        vals = np.array([t[i][1] for t in traces])
        with np.errstate(all="ignore"):
            out.append((traces[0][i][0], float(vals.mean())))
    return out


def run_suite(cfg: SuiteConfig, out_root, parallelism: int | None = None) -> SuiteResult:
    """Run every benchmark x algorithm x notation x run and write CSVs.

    Raw traces land in ``<out_root>/<suite_id>/``, next to ``summary.csv`` and
    ``mean_traces.csv``. Results do not depend on the degree of parallelism.
    """
    out_dir = Path(out_root) / cfg.suite_id
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, bi, ai, ni, r, str(out_dir))
            for bi in range(len(cfg.benchmarks))
            for ai in range(len(cfg.algorithms))
            for ni in range(len(cfg.notations))
            for r in range(cfg.runs)]
    workers = parallelism or cfg.parallelism
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_execute, jobs))
    else:
        outcomes = [_execute(j) for j in jobs]

    rows, mean_rows = [], []
    for bench_id in cfg.benchmarks:
        spec = get_benchmark(bench_id)
        depth, n_in, avg = feature_row(spec)
        for alg in cfg.algorithms:
            for notation in cfg.notations:
                group = [o for o in outcomes
                         if (o.benchmark, o.algorithm, o.notation) == (bench_id, alg, notation)]
                ok = [o for o in group if o.error is None]
                for o in group:
                    if o.error is not None:
                        log.warning("run %s/%s/%s/%d failed: %s", bench_id, alg, notation, o.run, o.error)
                mean, std = aggregate([o.final_mse for o in ok]) if ok else (math.nan, math.nan)
                rows.append({
                    "benchmark": bench_id, "algorithm": alg, "notation": notation,
                    "depth": depth, "input_count": n_in, "avg_nodes_per_layer": float(avg),
                    "mean_final_mse": mean, "std_final_mse": std, "runs": len(ok),
                })
                for t, m in mean_trace([o.samples for o in ok]):
                    mean_rows.append((bench_id, alg, notation, t, m))

    write_summary(rows, out_dir / "summary.csv")
    with (out_dir / "mean_traces.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("benchmark", "algorithm", "notation", "elapsed", "mean_best_mse"))
        for b, a, n, t, m in mean_rows:
            w.writerow((b, a, n, repr(t), repr(m)))
    return SuiteResult(cfg, out_dir, outcomes, rows)


def write_summary(rows: list[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def recompute_summary(out_dir) -> dict[tuple[str, str, str], tuple[float, float, int]]:
    """Aggregate final MSEs straight from the per-run trace CSVs in ``out_dir``."""
    groups: dict[tuple[str, str, str], list[float]] = {}
    for path in sorted(Path(out_dir).glob("*__run*.csv")):
        final = read_trace_csv(path)["final"]
        key = (path.name.split("__")[0], final["algorithm"], final["notation"])
        groups.setdefault(key, []).append(float(final["best_mse"]))
    return {k: (*aggregate(v), len(v)) for k, v in groups.items()}


def default_results_dir() -> Path:
    return Path(os.environ.get("FIXEDSR_RESULTS_DIR", "results"))


def with_overrides(cfg: SuiteConfig, **kw) -> SuiteConfig:
    return replace(cfg, **kw)
