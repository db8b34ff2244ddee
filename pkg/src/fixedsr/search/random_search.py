"""Random search: independent grammar rollouts, each fitted and scored."""

from ..evaluation import Dataset
from ..grammar import random_rollout
from ..tokens import TokenTable
from .base import Run, RunTrace, SearchConfig, StopSearch


def random_search(cfg: SearchConfig, table: TokenTable, data: Dataset) -> RunTrace:
    run = Run(cfg, table, data)
    try:
        while True:
            seq = random_rollout(cfg.notation, cfg.depth, table, run.rng)
            run.evaluate(seq)
    except StopSearch:
        pass
    return run.finish()
