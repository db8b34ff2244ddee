"""Depth-preserving genetic programming on flat token sequences.

Mutation and crossover splice sub-expressions of equal depth, located with
the grasp-span pass, so every offspring keeps depth exactly N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..evaluation import Dataset
from ..expr import ExpressionSeq, depth_of, find_subexpressions_of_depth
from ..grammar import random_rollout
from ..tokens import TokenTable
from .base import Run, RunTrace, SearchConfig, StopSearch


def _splice(seq: ExpressionSeq, start: int, stop: int, sub: tuple) -> ExpressionSeq:
    t = seq.tokens
    return seq.with_tokens(t[:start] + sub + t[stop + 1:])


def mutate(seq: ExpressionSeq, rng: np.random.Generator, n: int | None = None) -> ExpressionSeq:
    """Replace a random depth-n sub-expression by a fresh depth-n rollout.

    ``n`` defaults to a uniform draw from ``0..N-1`` (``0`` when N is 0).
    """
    N = depth_of(seq)[0]
    if n is None:
        n = int(rng.integers(0, N)) if N > 0 else 0
    sub = random_rollout(seq.notation, n, seq.table, rng)
    spans = find_subexpressions_of_depth(seq, n)
    span = spans[int(rng.integers(len(spans)))]
    return _splice(seq, span.start, span.stop, sub.tokens)


def crossover(a: ExpressionSeq, b: ExpressionSeq, rng: np.random.Generator,
              n: int | None = None) -> tuple[ExpressionSeq, ExpressionSeq]:
    """Swap one depth-n sub-expression between two parents of equal depth."""
    N = depth_of(a)[0]
    if n is None:
        n = int(rng.integers(0, N)) if N > 0 else 0
    sa = find_subexpressions_of_depth(a, n)
    sb = find_subexpressions_of_depth(b, n)
    x = sa[int(rng.integers(len(sa)))]
    y = sb[int(rng.integers(len(sb)))]
    piece_a = a.tokens[x.start:x.stop + 1]
    piece_b = b.tokens[y.start:y.stop + 1]
    return _splice(a, x.start, x.stop, piece_b), _splice(b, y.start, y.stop, piece_a)


@dataclass
class Individual:
    seq: ExpressionSeq
    consts: np.ndarray
    score: float


def select_top(pool: list[Individual], size: int) -> list[Individual]:
    """Highest scores first; ties keep pool order."""
    return sorted(pool, key=lambda ind: -ind.score)[:size]


def gp_search(cfg: SearchConfig, table: TokenTable, data: Dataset, observer=None) -> RunTrace:
    """``observer(parents, offspring, survivors)`` is called after every complete generation."""
    run = Run(cfg, table, data)
    rng = run.rng
    size = cfg.population
    population: list[Individual] = []

    def scored(seq):
        res = run.evaluate(seq)
        return Individual(seq, res.consts, res.score)

    try:
        for _ in range(size):
            population.append(scored(random_rollout(cfg.notation, cfg.depth, table, rng)))
        while True:
            parents = population
            offspring: list[Individual] = []
            complete = False
            try:
                while len(offspring) < size:
                    if len(parents) >= 2 and rng.random() < cfg.crossover_prob:
                        i, j = rng.choice(len(parents), size=2, replace=False)
                        c1, c2 = crossover(parents[i].seq, parents[j].seq, rng)
                        offspring.append(scored(c1))
                        offspring.append(scored(c2))
                    else:
                        p = parents[int(rng.integers(len(parents)))]
                        offspring.append(scored(mutate(p.seq, rng)))
                complete = True
            finally:
                # keep whatever was evaluated before the budget ran out
                population = select_top(parents + offspring, size)
            if complete and observer is not None:
                observer(parents, offspring, population)
    except StopSearch:
        pass
    return run.finish()
