"""Simulated annealing with subtree-replacement moves of depth 0..N."""

from __future__ import annotations

import math

import numpy as np

from ..evaluation import Dataset
from ..expr import ExpressionSeq, depth_of
from ..grammar import random_rollout
from ..tokens import TokenTable
from .base import Run, RunTrace, SearchConfig, StopSearch
from .gp import mutate


def acceptance_probability(delta: float, temperature: float) -> float:
    """``min(1, exp(delta / T))``."""
    if delta >= 0:
        return 1.0
    return math.exp(delta / temperature)


def cooling_ratio(i: int, t_min: float, t_max: float) -> float:
    return (t_min / t_max) ** (1.0 / (i + 1))


def clamp(t: float, t_min: float, t_max: float) -> float:
    return min(max(t, t_min), t_max)


def epoch_temperature(t: float, improved: bool, t_min: float, t_max: float) -> float:
    """Cool tenfold after an improving epoch, reheat tenfold after a stagnant one."""
    if improved:
        return max(t / 10.0, t_min)
    return min(10.0 * t, t_max)


def perturb(seq: ExpressionSeq, rng: np.random.Generator) -> ExpressionSeq:
    """Mutation with sub-expression depth drawn from ``0..N``; depth N redraws everything."""
    N = depth_of(seq)[0]
    return mutate(seq, rng, n=int(rng.integers(0, N + 1)))


def sa_search(cfg: SearchConfig, table: TokenTable, data: Dataset, observer=None) -> RunTrace:
    """``observer(i, temperature)`` sees the temperature after every iteration."""
    run = Run(cfg, table, data)
    rng = run.rng
    T = cfg.t_max
    try:
        current = random_rollout(cfg.notation, cfg.depth, table, rng)
        score_max = run.evaluate(current).score
        i = 0
        while True:
            cand = perturb(current, rng)
            s = run.evaluate(cand).score
            if s > score_max:
                current, score_max = cand, s
            elif rng.random() < acceptance_probability(s - score_max, T):
                current = cand
            T = clamp(T * cooling_ratio(i, cfg.t_min, cfg.t_max), cfg.t_min, cfg.t_max)
            if run.epoch_due():
                T = epoch_temperature(T, run.epoch_improved(), cfg.t_min, cfg.t_max)
            if observer is not None:
                observer(i, T)
            i += 1
    except StopSearch:
        pass
    return run.finish()
