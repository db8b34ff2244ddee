"""Shared fixtures and independent oracles.

The oracles here work on explicit trees and never call into the grammar,
depth or grasp routines they are used to check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from fixedsr.tokens import TokenTable

ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def small_table():
    # one unary, one binary, two leaves
    return TokenTable(("cos",), ("+",), 1, True)


@pytest.fixture
def feynman3():
    return TokenTable(("sin", "sqrt", "cos"), ("+", "-", "*", "/", "^"), 3, True)


# -- explicit tree oracles ----------------------------------------------------

def arity_of(table: TokenTable, t: int) -> int:
    if t < table.n_unary:
        return 1
    if t < table.n_unary + table.n_binary:
        return 2
    return 0


def brute_trees(table: TokenTable, max_depth: int) -> dict[int, list[tuple]]:
    """All trees grouped by exact depth, built bottom-up from leaf ids."""
    nu, nb = table.n_unary, table.n_binary
    leaves = [(t,) for t in range(nu + nb, table.n_tokens)]
    exact = {0: leaves}
    upto = {0: list(leaves)}
    for d in range(1, max_depth + 1):
        new = []
        for u in range(nu):
            new += [(u, c) for c in exact[d - 1]]
        for b in range(nu, nu + nb):
            for left, right in itertools.product(upto[d - 1], upto[d - 1]):
                if max(tree_height(left), tree_height(right)) == d - 1:
                    new.append((b, left, right))
        exact[d] = new
        upto[d] = upto[d - 1] + new
    return exact


def tree_height(tree: tuple) -> int:
    if len(tree) == 1:
        return 0
    return 1 + max(tree_height(c) for c in tree[1:])


def parse_prefix(table: TokenTable, tokens) -> tuple:
    """Recursive descent; raises if the sequence is not exactly one tree."""
    pos = 0

    def node():
        nonlocal pos
        t = tokens[pos]
        pos += 1
        return (t, *[node() for _ in range(arity_of(table, t))])

    tree = node()
    if pos != len(tokens):
        raise ValueError("trailing tokens")
    return tree


def parse_postfix(table: TokenTable, tokens) -> tuple:
    rev = list(reversed(tokens))
    pos = 0

    def node():
        nonlocal pos
        t = rev[pos]
        pos += 1
        kids = [node() for _ in range(arity_of(table, t))]
        return (t, *reversed(kids))

    tree = node()
    if pos != len(rev):
        raise ValueError("trailing tokens")
    return tree


def serialize(tree: tuple, postfix: bool) -> tuple:
    out = []

    def walk(n):
        if not postfix:
            out.append(n[0])
        for c in n[1:]:
            walk(c)
        if postfix:
            out.append(n[0])

    walk(tree)
    return tuple(out)


def subtree_table(table: TokenTable, tokens, postfix: bool) -> dict[int, tuple[int, int, int]]:
    """index -> (start, stop, depth) for the subtree rooted at each index."""
    tree = parse_postfix(table, tokens) if postfix else parse_prefix(table, tokens)
    out = {}

    def walk(n, start):
        # returns the number of tokens in the subtree
        size = 1
        if not postfix:
            cursor = start + 1
            for c in n[1:]:
                cursor += walk(c, cursor)
            size = cursor - start
            out[start] = (start, start + size - 1, tree_height(n))
        else:
            cursor = start
            for c in n[1:]:
                cursor += walk(c, cursor)
            size = cursor - start + 1
            out[cursor] = (start, cursor, tree_height(n))
        return size

    walk(tree, 0)
    return out


_UNARY = {"sin": math.sin, "cos": math.cos, "sqrt": math.sqrt, "exp": math.exp,
          "log": math.log, "tan": math.tan, "neg": lambda a: -a, "abs": abs}
_BINARY = {"+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
           "/": lambda a, b: a / b, "^": lambda a, b: a ** b}


def eval_tree(table: TokenTable, tree: tuple, row, consts: list[float]) -> float:
    """Scalar evaluation; ``consts`` is consumed left to right in tree order."""
    it = iter(consts)

    def ev(n):
        t = n[0]
        a = arity_of(table, t)
        if a == 0:
            v = t - table.n_unary - table.n_binary
            return next(it) if v == table.num_variables else float(row[v])
        if a == 1:
            return _UNARY[table.unary[t]](ev(n[1]))
        left = ev(n[1])
        right = ev(n[2])
        return _BINARY[table.binary[t - table.n_unary]](left, right)

    return ev(tree)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
