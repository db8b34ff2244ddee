"""Dataset handling, column-wise evaluation, the bounded score and
Levenberg-Marquardt fitting of ``const`` tokens."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._backend import kernels
from .expr import ExpressionSeq


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()
    cols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("X must be a non-empty (N_dat, D) matrix")
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        self.X, self.y = X, y
        if not self.feature_names:
            self.feature_names = tuple(f"x{i + 1}" for i in range(X.shape[1]))
        elif len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names must have one entry per column")
        self.cols = np.ascontiguousarray(X.T)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def num_features(self) -> int:
        return self.X.shape[1]


def load_dataset(path) -> Dataset:
    """Read ``x1,...,xD,y`` CSV."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [[float(v) for v in row] for row in reader if row]
    if len(header) < 2 or header[-1] != "y":
        raise ValueError(f"{path}: header must be x1,...,xD,y")
    data = np.asarray(rows, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: every row needs {len(header)} values")
    return Dataset(data[:, :-1], data[:, -1], tuple(header[:-1]))


def save_dataset(ds: Dataset, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(ds.num_features)] + ["y"])
        for row, yv in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(yv))])


def evaluate(seq: ExpressionSeq, X, consts=()) -> np.ndarray:
    """Predictions of ``seq`` on every row of ``X`` (a matrix or a :class:`Dataset`).

    Arithmetic is unprotected: non-finite intermediate values propagate.
    """
    cols = X.cols if isinstance(X, Dataset) else np.ascontiguousarray(np.asarray(X, dtype=np.float64).T)
    if cols.ndim != 2:
        raise ValueError("X must be two-dimensional")
    table = seq.table
    if cols.shape[0] < table.num_variables:
        raise ValueError(f"expression table uses {table.num_variables} variables, data has {cols.shape[0]}")
    c = np.ascontiguousarray(consts, dtype=np.float64).reshape(-1)
    return kernels.evaluate(seq.tokens, table.kinds, table.args, cols, c, seq.postfix)


def mse(pred, y) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if pred.shape != y.shape:
        raise ValueError("prediction and label lengths differ")
    with np.errstate(all="ignore"):
        r = pred - y
        value = float(np.dot(r, r)) / r.shape[0]
    return value if math.isfinite(value) else math.inf


def score(mse_value: float) -> float:
    """Bounded fitness ``1 / (1 + mse)``; ``+inf`` maps to 0."""
    if mse_value < 0 or math.isnan(mse_value):
        raise ValueError("mse must be non-negative")
    if math.isinf(mse_value):
        return 0.0
    return 1.0 / (1.0 + mse_value)


@dataclass(frozen=True)
class FitConfig:
    lm_iterations: int = 5
    init_constant: float = 1.0
    damping_init: float = 1e-3
    damping_factor: float = 10.0
    jacobian_step: float = 1e-4

    def __post_init__(self):
        if self.lm_iterations < 0:
            raise ValueError("lm_iterations must be >= 0")
        if self.damping_init <= 0 or self.jacobian_step <= 0 or self.damping_factor <= 1:
            raise ValueError("damping_init and jacobian_step must be > 0, damping_factor > 1")


class ConstCache:
    """Best constants seen per expression; a stored score never decreases."""

    def __init__(self):
        self._best: dict[tuple, tuple[np.ndarray, float]] = {}

    def __len__(self):
        return len(self._best)

    def __contains__(self, key):
        return key in self._best

    def get(self, key):
        return self._best.get(key)

    def update(self, key, consts: np.ndarray, score_value: float) -> bool:
        old = self._best.get(key)
        if old is not None and old[1] >= score_value:
            return False
        self._best[key] = (np.array(consts, dtype=np.float64), score_value)
        return True


@dataclass
class FitResult:
    consts: np.ndarray
    mse: float
    score: float


def residuals(seq: ExpressionSeq, ds: Dataset, consts) -> np.ndarray:
    return evaluate(seq, ds, consts) - ds.y


def numerical_jacobian(seq: ExpressionSeq, ds: Dataset, consts, rel_step: float = 1e-4) -> np.ndarray:
    """Central-difference Jacobian of the predictions, shape (N_dat, n_consts)."""
    c = np.array(consts, dtype=np.float64)
    J = np.empty((ds.n, c.shape[0]))
    for i in range(c.shape[0]):
        h = rel_step * max(1.0, abs(c[i]))
        ci = c[i]
        c[i] = ci + h
        up = evaluate(seq, ds, c)
        c[i] = ci - h
        down = evaluate(seq, ds, c)
        c[i] = ci
        with np.errstate(all="ignore"):
            J[:, i] = (up - down) / (2.0 * h)
    return J


def fit_constants(seq: ExpressionSeq, ds: Dataset, cache: ConstCache | None = None,
                  config: FitConfig = FitConfig()) -> FitResult:
    """Fit the ``const`` tokens of ``seq`` by damped Gauss-Newton steps.

    Every attempted step counts towards ``lm_iterations``; a step is kept only
    if it lowers the residual norm, so the result is never worse than the seed.
    """
    k = seq.num_constants
    if k == 0:
        m = mse(evaluate(seq, ds), ds.y)
        return FitResult(np.empty(0), m, score(m))

    key = seq.key
    cached = cache.get(key) if cache is not None else None
    c = np.array(cached[0]) if cached is not None else np.full(k, config.init_constant)

    seed_mse = mse(evaluate(seq, ds, c), ds.y)
    if not math.isfinite(seed_mse):
        return FitResult(c, math.inf, 0.0)
    table = seq.table
    fitted, _ = kernels.fit_lm(seq.tokens, table.kinds, table.args, ds.cols, ds.y, c,
                               config.lm_iterations, config.damping_init,
                               config.damping_factor, config.jacobian_step, seq.postfix)
    # re-measure with the same summation as the seed so rounding cannot make
    # an accepted fit look worse than where it started
    m = mse(evaluate(seq, ds, fitted), ds.y)
    if m <= seed_mse:
        c = fitted
    else:
        m = seed_mse
    s = score(m)
    if cache is not None:
        cache.update(key, c, s)
    return FitResult(c, m, s)
