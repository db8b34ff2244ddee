"""Shared run bookkeeping: configuration, clocks, trace sampling and the
fit-score-track step every strategy performs on a completed expression."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..evaluation import ConstCache, Dataset, FitConfig, fit_constants
from ..expr import ExpressionSeq, check_notation, format_tokens
from ..grammar import check_table_supports
from ..tokens import TokenTable

ALGORITHMS = ("random", "mcts", "pso", "gp", "sa")


@dataclass(frozen=True)
class SearchConfig:
    """One search run.

    With ``time_budget`` set the run is wall-clock bound and trace times are
    seconds. With only ``max_iterations`` set the run is time-free: the clock
    counts completed expressions and ``sample_interval`` is in iterations,
    which makes traces fully reproducible.
    """

    algorithm: str = "random"
    notation: str = "postfix"
    depth: int = 1
    n_iter: int = 50_000
    time_budget: float | None = 120.0
    max_iterations: int | None = None
    sample_interval: float = 6.0
    seed: int = 0
    fit: FitConfig = FitConfig()
    # MCTS
    exploration: float = math.sqrt(2.0)
    # PSO
    inertia: float = 0.721
    phi1: float = 2.8
    phi2: float = 1.3
    # GP
    population: int = 2000
    crossover_prob: float = 0.2
    # SA
    t_min: float = 0.012
    t_max: float = 0.1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        check_notation(self.notation)
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.time_budget is None and self.max_iterations is None:
            raise ValueError("set time_budget, max_iterations or both")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError("time_budget must be > 0")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be > 0")
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must lie in [0, 1]")
        if not 0 < self.t_min <= self.t_max:
            raise ValueError("need 0 < t_min <= t_max")

    @property
    def time_free(self) -> bool:
        return self.time_budget is None


@dataclass
class RunTrace:
    algorithm: str
    notation: str
    depth: int
    samples: list[tuple[float, float]] = field(default_factory=list)
    best_expression: ExpressionSeq | None = None
    best_constants: np.ndarray = field(default_factory=lambda: np.empty(0))
    best_mse: float = math.inf
    best_score: float = 0.0
    iterations: int = 0
    time_free: bool = False

    CSV_HEADER = ("kind", "run_id", "algorithm", "notation", "depth", "elapsed",
                  "best_mse", "iterations", "expression", "constants")

    def to_csv(self, run_id: str = "0") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for t, m in self.samples:
            w.writerow(["sample", run_id, self.algorithm, self.notation, self.depth,
                        repr(float(t)), repr(float(m)), "", "", ""])
        expr = format_tokens(self.best_expression) if self.best_expression is not None else ""
        consts = " ".join(repr(float(c)) for c in self.best_constants)
        last_t = self.samples[-1][0] if self.samples else 0.0
        w.writerow(["final", run_id, self.algorithm, self.notation, self.depth,
                    repr(float(last_t)), repr(float(self.best_mse)), self.iterations, expr, consts])
        return buf.getvalue()


def read_trace_csv(path) -> dict:
    """Parse a trace CSV into ``{"samples": [(t, mse)], "final": {...}}``."""
    samples, final = [], None
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["kind"] == "sample":
                samples.append((float(row["elapsed"]), float(row["best_mse"])))
            elif row["kind"] == "final":
                final = row
    if final is None:
        raise ValueError(f"{path}: no final row")
    return {"samples": samples, "final": final}


class StopSearch(Exception):
    """Raised inside a strategy once the budget is spent."""


class Run:
    """Budget, clock, constant cache, best-so-far and trace sampling for one run."""

    def __init__(self, cfg: SearchConfig, table: TokenTable, data: Dataset):
        check_table_supports(table, cfg.depth)
        if table.num_variables > data.num_features:
            raise ValueError("token table has more variables than the dataset")
        self.cfg = cfg
        self.table = table
        self.data = data
        self.rng = np.random.default_rng(cfg.seed)
        self.cache = ConstCache()
        self.trace = RunTrace(cfg.algorithm, cfg.notation, cfg.depth, time_free=cfg.time_free)
        self.iterations = 0
        self._start = time.perf_counter()
        self._next_sample = 1
        self._epoch_best = 0.0
        if cfg.time_free:
            self._horizon = float(cfg.max_iterations)
        else:
            self._horizon = float(cfg.time_budget)

    # clock ---------------------------------------------------------------
    def elapsed(self) -> float:
        if self.cfg.time_free:
            return float(self.iterations)
        return time.perf_counter() - self._start

    def exhausted(self) -> bool:
        if self.cfg.max_iterations is not None and self.iterations >= self.cfg.max_iterations:
            return True
        return not self.cfg.time_free and self.elapsed() >= self.cfg.time_budget

    def _sample(self, upto: float) -> None:
        interval = self.cfg.sample_interval
        while self._next_sample * interval <= upto + 1e-12 and self._next_sample * interval <= self._horizon + 1e-12:
            self.trace.samples.append((self._next_sample * interval, self.trace.best_mse))
            self._next_sample += 1

    # evaluation ------------------------------------------------------------
    @property
    def best_score(self) -> float:
        return self.trace.best_score

    def evaluate(self, seq: ExpressionSeq):
        """Fit and score a completed expression, update the best, tick the clock."""
        if self.exhausted():
            raise StopSearch
        res = fit_constants(seq, self.data, self.cache, self.cfg.fit)
        tr = self.trace
        if res.score > tr.best_score or tr.best_expression is None:
            tr.best_score = res.score
            tr.best_mse = res.mse
            tr.best_expression = seq
            tr.best_constants = res.consts
        self.iterations += 1
        tr.iterations = self.iterations
        self._sample(self.elapsed())
        return res

    def epoch_due(self) -> bool:
        return self.iterations > 0 and self.iterations % self.cfg.n_iter == 0

    def epoch_improved(self) -> bool:
        """Whether the best score rose since the previous epoch boundary."""
        improved = self.trace.best_score > self._epoch_best
        self._epoch_best = self.trace.best_score
        return improved

    def finish(self) -> RunTrace:
        # fill the remaining sample grid with the final best
        self._sample(self._horizon)
        return self.trace
