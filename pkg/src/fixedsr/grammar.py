"""Faultless fixed-depth grammars for prefix and postfix token sequences.

A state tracks just enough to answer "can this partial sequence still be
completed at depth exactly N after appending a token of class k?":

* prefix: the stack of open argument-slot depths (non-decreasing from bottom
  to top) and the deepest placed token;
* postfix: the stack of completed-subtree depths together with running maxima
  ``pm[i] = max_{j<=i}(stack[j] + j + 1)``, which give the minimum completion
  depth (a top-down fold of the stack) in O(1).

Legality only depends on the token class, so legal sets are unions of the
unary, binary and leaf blocks of the token table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ._backend import kernels
from .expr import POSTFIX, PREFIX, ExpressionSeq, check_notation
from .tokens import TokenTable

MAX_ROLLOUT_DEPTH = 20


class GrammarError(ValueError):
    """Raised for illegal tokens, finished states or unsatisfiable tables."""


@dataclass(frozen=True)
class GrammarState:
    notation: str
    N: int
    table: TokenTable
    tokens: tuple[int, ...] = ()
    num_leaves: int = 0
    num_binary: int = 0
    num_unary: int = 0
    # prefix bookkeeping
    slots: tuple[int, ...] = (0,)
    placed: int = 0
    # postfix bookkeeping
    stack: tuple[int, ...] = ()
    pm: tuple[int, ...] = field(default=(), repr=False)

    @classmethod
    def initial(cls, notation: str, N: int, table: TokenTable) -> "GrammarState":
        check_notation(notation)
        if N < 0:
            raise GrammarError("depth must be non-negative")
        return cls(notation, N, table)

    @property
    def postfix(self) -> bool:
        return self.notation == POSTFIX

    @property
    def is_complete(self) -> bool:
        """Structurally complete: no open slots / a single subtree on the stack."""
        if self.postfix:
            return len(self.stack) == 1
        return not self.slots

    @property
    def depth(self) -> int:
        if self.postfix:
            return max(self.stack) if self.stack else 0
        return max(self.placed, self.slots[-1]) if self.slots else self.placed

    @property
    def is_done(self) -> bool:
        """Complete with depth exactly N; nothing may be appended any more."""
        if self.postfix:
            return len(self.stack) == 1 and self.stack[0] == self.N
        return not self.slots

    def min_completion_depth(self) -> int:
        if self.postfix:
            k = len(self.stack)
            if k == 0:
                return 0
            if k == 1:
                return self.stack[0]
            return max(self.pm[k - 2], self.stack[-1] + k - 1)
        return self.depth

    def legal_classes(self) -> tuple[bool, bool, bool]:
        """Whether (unary, binary, leaf) tokens may be appended."""
        if self.is_done:
            raise GrammarError("state is already a complete depth-N expression")
        t, N = self.table, self.N
        has_u, has_b = t.n_unary > 0, t.n_binary > 0
        if self.postfix:
            k = len(self.stack)
            if k == 0:
                return False, False, True
            top = self.stack[-1]
            below = self.pm[k - 2] if k >= 2 else -1
            mc_leaf = max(below, top + k)
            mc_un = top + 1 if k == 1 else max(below, top + k)
            unary_ok = has_u and self.num_leaves >= 1 and mc_un <= N
            binary_ok = has_b and self.num_binary != self.num_leaves - 1
            leaf_ok = has_b and mc_leaf <= N
            return unary_ok, binary_ok, leaf_ok
        d = self.slots[-1]
        ops_ok = d + 1 <= N
        one_slot = self.num_leaves == self.num_binary  # next leaf would complete
        leaf_ok = not (one_slot and max(self.placed, d) < N)
        return has_u and ops_ok, has_b and ops_ok, leaf_ok

    def legal_tokens(self) -> list[int]:
        unary_ok, binary_ok, leaf_ok = self.legal_classes()
        t = self.table
        out: list[int] = []
        if unary_ok:
            out.extend(t.unary_ids)
        if binary_ok:
            out.extend(t.binary_ids)
        if leaf_ok:
            out.extend(t.leaf_ids)
        return out

    def step(self, token: int) -> "GrammarState":
        unary_ok, binary_ok, leaf_ok = self.legal_classes()
        table = self.table
        if not 0 <= token < table.n_tokens:
            raise GrammarError(f"token id {token} out of range")
        arity = table.arity(token)
        if not (leaf_ok, unary_ok, binary_ok)[arity]:
            raise GrammarError(f"token {table.symbol(token)!r} is not legal here")
        nl = self.num_leaves + (arity == 0)
        nb = self.num_binary + (arity == 2)
        nu = self.num_unary + (arity == 1)
        tokens = self.tokens + (token,)
        if self.postfix:
            stack, pm = list(self.stack), list(self.pm)
            k = len(stack)
            if arity == 0:
                stack.append(0)
                pm.append(k + 1 if k == 0 else max(pm[-1], k + 1))
            elif arity == 1:
                stack[-1] += 1
                pm[-1] = stack[-1] + k if k == 1 else max(pm[-2], stack[-1] + k)
            else:
                b = stack.pop()
                pm.pop()
                stack[-1] = max(stack[-1], b) + 1
                pm[-1] = stack[-1] + k - 1 if k == 2 else max(pm[-2], stack[-1] + k - 1)
            return GrammarState(self.notation, self.N, table, tokens, nl, nb, nu,
                                self.slots, self.placed, tuple(stack), tuple(pm))
        slots = list(self.slots)
        d = slots.pop()
        slots.extend([d + 1] * arity)
        return GrammarState(self.notation, self.N, table, tokens, nl, nb, nu,
                            tuple(slots), max(self.placed, d), self.stack, self.pm)

    def to_seq(self) -> ExpressionSeq:
        return ExpressionSeq(self.tokens, self.notation, self.table)


def legal_tokens_prefix(state: GrammarState) -> list[int]:
    if state.postfix:
        raise GrammarError("expected a prefix state")
    return state.legal_tokens()


def legal_tokens_postfix(state: GrammarState) -> list[int]:
    if not state.postfix:
        raise GrammarError("expected a postfix state")
    return state.legal_tokens()


def legal_tokens(state: GrammarState) -> list[int]:
    return state.legal_tokens()


def step(state: GrammarState, token: int) -> GrammarState:
    return state.step(token)


def max_tokens(N: int) -> int:
    """Upper bound on the length of any depth-N expression."""
    return (1 << (N + 1)) - 1


def check_table_supports(table: TokenTable, N: int) -> None:
    if N < 0:
        raise GrammarError("depth must be non-negative")
    if N >= 1 and table.n_unary + table.n_binary == 0:
        raise GrammarError(f"depth {N} needs at least one operator")


def random_rollout(notation: str, N: int, table: TokenTable, rng: np.random.Generator) -> ExpressionSeq:
    """A complete depth-N sequence, choosing uniformly among legal tokens."""
    check_notation(notation)
    check_table_supports(table, N)
    if N > MAX_ROLLOUT_DEPTH:
        raise GrammarError(f"rollouts are limited to depth {MAX_ROLLOUT_DEPTH}")
    u = rng.random(max_tokens(N))
    if notation == PREFIX:
        toks = kernels.rollout_prefix(N, table.n_unary, table.n_binary, table.n_leaves, u)
    else:
        toks = kernels.rollout_postfix(N, table.n_unary, table.n_binary, table.n_leaves, u)
    return ExpressionSeq(toks, notation, table)


def rollout_with_uniforms(notation: str, N: int, table: TokenTable, u) -> ExpressionSeq:
    """Reference rollout driven through :class:`GrammarState` (slow path).

    Consumes ``u`` exactly like the kernels, so both produce the same sequence.
    """
    state = GrammarState.initial(notation, N, table)
    pos = 0
    while not state.is_done:
        legal = state.legal_tokens()
        if not legal:
            raise GrammarError(f"no legal token at step {pos}")
        j = min(int(u[pos] * len(legal)), len(legal) - 1)
        state = state.step(legal[j])
        pos += 1
    return state.to_seq()


class EnumerationLimitExceeded(GrammarError):
    pass


def enumerate_all(notation: str, N: int, table: TokenTable, limit: int = 1_000_000) -> Iterator[ExpressionSeq]:
    """Every sequence the grammar can produce at depth N, depth-first.

    Raises :class:`EnumerationLimitExceeded` once more than ``limit`` have been yielded.
    """
    check_table_supports(table, N)
    count = 0
    stack = [GrammarState.initial(notation, N, table)]
    while stack:
        state = stack.pop()
        if state.is_done:
            count += 1
            if count > limit:
                raise EnumerationLimitExceeded(f"more than {limit} expressions")
            yield state.to_seq()
            continue
        # reversed so that tokens come out in ascending id order
        for t in reversed(state.legal_tokens()):
            stack.append(state.step(t))


def reachable_states(notation: str, N: int, table: TokenTable) -> Iterator[GrammarState]:
    """Every state reachable from the empty sequence, done states included."""
    stack = [GrammarState.initial(notation, N, table)]
    while stack:
        state = stack.pop()
        yield state
        if not state.is_done:
            for t in state.legal_tokens():
                stack.append(state.step(t))
