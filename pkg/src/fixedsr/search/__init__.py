"""The five fixed-depth search strategies."""

from .base import ALGORITHMS, RunTrace, SearchConfig, read_trace_csv
from .gp import crossover, gp_search, mutate
from .mcts import mcts_search
from .pso import pso_search
from .random_search import random_search
from .sa import sa_search

STRATEGIES = {
    "random": random_search,
    "mcts": mcts_search,
    "pso": pso_search,
    "gp": gp_search,
    "sa": sa_search,
}


def run_search(cfg: SearchConfig, table, data) -> RunTrace:
    return STRATEGIES[cfg.algorithm](cfg, table, data)


__all__ = [
    "ALGORITHMS", "RunTrace", "SearchConfig", "read_trace_csv", "crossover", "mutate",
    "gp_search", "mcts_search", "pso_search", "random_search", "sa_search", "run_search",
    "STRATEGIES",
]
