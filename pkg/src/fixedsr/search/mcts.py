"""Tabular Monte Carlo tree search over grammar states.

States are keyed by their exact token sequence. Each iteration descends from
the empty sequence, taking the first unvisited legal token or else the UCT
maximiser, then backs the completed expression's score up the path with a
max-update.
"""

from __future__ import annotations

import math
from collections import defaultdict

from ..evaluation import Dataset
from ..grammar import GrammarState
from ..tokens import TokenTable
from .base import Run, RunTrace, SearchConfig, StopSearch

SQRT2 = math.sqrt(2.0)


class MctsTable:
    def __init__(self, c: float = SQRT2):
        self.c = c
        self.n_state: dict[tuple, int] = defaultdict(int)
        self.n_action: dict[tuple, int] = defaultdict(int)
        self.q: dict[tuple, float] = {}

    def select(self, state_key: tuple, legal: list[int]) -> int:
        n_sa = self.n_action
        for a in legal:
            if n_sa.get((state_key, a), 0) == 0:
                return a
        return uct_select(legal,
                          [self.q.get((state_key, a), 0.0) for a in legal],
                          [n_sa[(state_key, a)] for a in legal],
                          self.n_state[state_key], self.c)

    def backup(self, path: list[tuple[tuple, int]], score: float) -> None:
        for key, a in path:
            sa = (key, a)
            q = self.q.get(sa, 0.0)
            self.q[sa] = q if q >= score else score
            self.n_action[sa] += 1
            self.n_state[key] += 1


def uct_select(actions, q, n_sa, n_s, c) -> int:
    """``argmax_a Q(s,a) + c * sqrt(ln N(s) / N(s,a))``; ties go to the first action."""
    log_ns = math.log(n_s)
    best_a, best_v = None, -math.inf
    for a, qa, na in zip(actions, q, n_sa):
        v = qa + c * math.sqrt(log_ns / na)
        if v > best_v:
            best_a, best_v = a, v
    return best_a


def next_exploration(c: float, improved: bool) -> float:
    """Epoch rule: reset to sqrt(2) after improvement, otherwise widen by sqrt(2)."""
    return SQRT2 if improved else c + SQRT2


def mcts_search(cfg: SearchConfig, table: TokenTable, data: Dataset, observer=None) -> RunTrace:
    """``observer(iteration, c)`` is called at every epoch boundary."""
    run = Run(cfg, table, data)
    tree = MctsTable(cfg.exploration)
    root = GrammarState.initial(cfg.notation, cfg.depth, table)
    try:
        while True:
            state = root
            path = []
            while not state.is_done:
                a = tree.select(state.tokens, state.legal_tokens())
                path.append((state.tokens, a))
                state = state.step(a)
            res = run.evaluate(state.to_seq())
            tree.backup(path, res.score)
            if run.epoch_due():
                tree.c = next_exploration(tree.c, run.epoch_improved())
                if observer is not None:
                    observer(run.iterations, tree.c)
    except StopSearch:
        pass
    return run.finish()
