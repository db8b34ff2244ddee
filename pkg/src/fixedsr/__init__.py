"""Fixed-depth prefix and postfix symbolic regression."""

from ._backend import BACKEND
from .evaluation import ConstCache, Dataset, FitConfig, evaluate, fit_constants, mse, score
from .expr import ExpressionSeq, depth_of, parse_expression, to_infix
from .grammar import GrammarState, enumerate_all, random_rollout
from .search import SearchConfig, run_search
from .tokens import TokenTable

__all__ = [
    "BACKEND", "ConstCache", "Dataset", "FitConfig", "evaluate", "fit_constants", "mse", "score",
    "ExpressionSeq", "depth_of", "parse_expression", "to_infix", "GrammarState", "enumerate_all",
    "random_rollout", "SearchConfig", "run_search", "TokenTable",
]
