"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Each row reports the best-of-``repeat`` wall time per backend and the speedup.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fixedsr._backend import compiled_kernels, python_kernels
from fixedsr.bench import get_benchmark, sample_dataset
from fixedsr.grammar import max_tokens, random_rollout
from fixedsr.tokens import TokenTable

TABLE = TokenTable(("sin", "sqrt", "cos"), ("+", "-", "*", "/", "^"), 3, True)


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    N = 6
    uniforms = [rng.random(max_tokens(N)) for _ in range(20_000)]
    nu, nb, nl = TABLE.n_unary, TABLE.n_binary, TABLE.n_leaves

    def rollouts(k):
        def run():
            for u in uniforms:
                k.rollout_postfix(N, nu, nb, nl, u)
                k.rollout_prefix(N, nu, nb, nl, u)
        return run

    seqs = [random_rollout("postfix", N, TABLE, rng).tokens for _ in range(20_000)]

    def depths(k):
        def run():
            for s in seqs:
                k.postfix_depth(s, nu, nb)
                k.subtree_spans(s, nu, nb, True)
        return run

    hemberg = get_benchmark("hemberg-1")
    data = sample_dataset(hemberg, np.random.default_rng(1))
    t = hemberg.table
    fits = []
    while len(fits) < 2000:
        s = random_rollout("postfix", 4, t, rng)
        if s.num_constants:
            fits.append(s.tokens)

    def lm(k):
        def run():
            with np.errstate(all="ignore"):
                for s in fits:
                    c0 = np.ones(sum(1 for x in s if t.kinds[x] == 3))
                    k.fit_lm(s, t.kinds, t.args, data.cols, data.y, c0, 5, 1.0, 10.0, 1e-4, True)
        return run

    cols = np.ascontiguousarray(rng.uniform(1, 5, size=(3, 1000)))
    evals = []
    for _ in range(2000):
        s = random_rollout("postfix", N, TABLE, rng)
        evals.append((s.tokens, rng.uniform(1, 2, size=s.num_constants)))

    def evaluate(k):
        def run():
            with np.errstate(all="ignore"):
                for s, c in evals:
                    k.evaluate(s, TABLE.kinds, TABLE.args, cols, c, True)
        return run

    return [
        ("rollouts (40k, depth 6)", rollouts),
        ("depth + spans (20k, depth 6)", depths),
        ("evaluate (2k x 1000 rows)", evaluate),
        ("LM fit (2k, hemberg-1, 20 rows)", lm),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if compiled_kernels is None:
        raise SystemExit("compiled extension not available; build it with pip install -e .")
    print(f"{'kernel':34} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, make in cases():
        tp = _best(make(python_kernels), args.repeat)
        tc = _best(make(compiled_kernels), args.repeat)
        print(f"{name:34} {tp:10.3f} {tc:10.3f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
