"""Flat token sequences in prefix or postfix order and the routines that
inspect them without building a tree: depth and completeness, minimum
completion depth, grasp spans, depth-n sub-expressions and tree statistics.

Explicit trees (nested tuples ``(token_id, *children)``) exist only for
notation conversion, infix display and as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, NamedTuple

from ._backend import kernels
from .tokens import TokenTable

PREFIX = "prefix"
POSTFIX = "postfix"
NOTATIONS = (PREFIX, POSTFIX)


def check_notation(notation: str) -> str:
    if notation not in NOTATIONS:
        raise ValueError(f"notation must be 'prefix' or 'postfix', got {notation!r}")
    return notation


@dataclass(frozen=True)
class ExpressionSeq:
    """A (possibly partial) token sequence tagged with its notation."""

    tokens: tuple[int, ...]
    notation: str
    table: TokenTable

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        check_notation(self.notation)
        nt = self.table.n_tokens
        for pos, t in enumerate(self.tokens):
            if not 0 <= t < nt:
                raise ValueError(f"token id {t} at position {pos} out of range")

    def __len__(self):
        return len(self.tokens)

    @property
    def postfix(self) -> bool:
        return self.notation == POSTFIX

    @property
    def key(self) -> tuple:
        return (self.notation, self.tokens)

    def depth(self) -> tuple[int, bool]:
        return depth_of(self)

    @property
    def is_complete(self) -> bool:
        return bool(self.tokens) and depth_of(self)[1]

    @property
    def num_constants(self) -> int:
        cid = self.table.const_id
        return 0 if cid is None else self.tokens.count(cid)

    def with_tokens(self, tokens: Iterable[int]) -> "ExpressionSeq":
        return ExpressionSeq(tuple(tokens), self.notation, self.table)

    def __str__(self):
        return format_tokens(self)


class SubExprSpan(NamedTuple):
    start: int
    stop: int  # inclusive
    depth: int


@lru_cache(maxsize=1 << 16)
def _cached_depth(tokens: tuple, nu: int, nb: int, postfix: bool) -> tuple[int, bool]:
    if postfix:
        return kernels.postfix_depth(tokens, nu, nb)
    return kernels.prefix_depth(tokens, nu, nb)


def pn_depth(seq: ExpressionSeq) -> tuple[int, bool]:
    """Depth and completeness of a prefix sequence.

    A lone leaf has depth 0. For a partial sequence the depth counts the
    argument slots already opened by placed operators, so ``+ cos`` reports 2.
    """
    if seq.notation != PREFIX:
        raise ValueError("pn_depth needs a prefix sequence")
    return _cached_depth(seq.tokens, seq.table.n_unary, seq.table.n_binary, False)


def rpn_depth(seq: ExpressionSeq) -> tuple[int, bool]:
    """Depth and completeness of a postfix sequence.

    The depth of a partial sequence is the deepest completed subtree on the stack.
    """
    if seq.notation != POSTFIX:
        raise ValueError("rpn_depth needs a postfix sequence")
    return _cached_depth(seq.tokens, seq.table.n_unary, seq.table.n_binary, True)


def depth_of(seq: ExpressionSeq) -> tuple[int, bool]:
    return rpn_depth(seq) if seq.postfix else pn_depth(seq)


def postfix_stack(seq: ExpressionSeq) -> list[int]:
    """Depths of the completed subtrees on the stack after a postfix sequence."""
    table = seq.table
    stack: list[int] = []
    for pos, t in enumerate(seq.tokens):
        a = table.arity(t)
        if len(stack) < a:
            raise ValueError(f"operator at position {pos} lacks operands")
        if a == 0:
            stack.append(0)
        elif a == 1:
            stack[-1] += 1
        else:
            b = stack.pop()
            stack[-1] = max(stack[-1], b) + 1
    return stack


def min_completion_depth(seq: ExpressionSeq) -> int:
    """Smallest depth reachable by any complete extension of ``seq``.

    Prefix: every open argument slot receives a leaf. Postfix: the stack is
    folded from the top, since a binary operator can only join the two
    topmost subtrees.
    """
    if not seq.tokens:
        return 0
    if not seq.postfix:
        return pn_depth(seq)[0]
    stack = postfix_stack(seq)
    if len(stack) > 1 and seq.table.n_binary == 0:
        raise ValueError("sequence cannot be completed without binary operators")
    return kernels.postfix_fold(stack)


def grasp_span(seq: ExpressionSeq, idx: int) -> SubExprSpan:
    """Span of the subtree anchored at ``tokens[idx]``.

    Walks right (prefix) or left (postfix) from ``idx`` keeping a count of
    pending arguments until it drops to zero.
    """
    tokens, table = seq.tokens, seq.table
    if not 0 <= idx < len(tokens):
        raise IndexError(idx)
    if not seq.is_complete:
        raise ValueError("grasp_span needs a complete expression")
    pending = table.arity(tokens[idx])
    j = idx
    step = -1 if seq.postfix else 1
    while pending > 0:
        j += step
        pending += table.arity(tokens[j]) - 1
    start, stop = (j, idx) if seq.postfix else (idx, j)
    depth = depth_of(seq.with_tokens(tokens[start : stop + 1]))[0]
    return SubExprSpan(start, stop, depth)


def subtree_spans(seq: ExpressionSeq) -> list[SubExprSpan]:
    """The subtree span of every index, from one stack pass."""
    starts, stops, depths = kernels.subtree_spans(
        seq.tokens, seq.table.n_unary, seq.table.n_binary, seq.postfix
    )
    return [SubExprSpan(a, b, d) for a, b, d in zip(starts, stops, depths)]


def find_subexpressions_of_depth(seq: ExpressionSeq, n: int) -> list[SubExprSpan]:
    """All sub-expressions of depth exactly ``n``, ordered by start index."""
    starts, stops, depths = kernels.subtree_spans(
        seq.tokens, seq.table.n_unary, seq.table.n_binary, seq.postfix
    )
    found = [SubExprSpan(a, b, d) for a, b, d in zip(starts, stops, depths) if d == n]
    if seq.postfix:
        found.sort()
    return found


def tree_stats(seq: ExpressionSeq) -> tuple[int, int, Fraction]:
    """``(num_nodes, depth, avg_nodes_per_layer)``; layers are depth + 1."""
    depth, complete = depth_of(seq)
    if not complete:
        raise ValueError("tree_stats needs a complete expression")
    n = len(seq.tokens)
    return n, depth, Fraction(n, depth + 1)


# -- explicit trees ---------------------------------------------------------

def to_tree(seq: ExpressionSeq) -> tuple:
    """Deserialize a complete sequence into nested ``(token_id, *children)`` tuples."""
    table = seq.table
    tokens = seq.tokens
    if not tokens:
        raise ValueError("empty token sequence")
    if seq.postfix:
        stack: list[tuple] = []
        for pos, t in enumerate(tokens):
            a = table.arity(t)
            if len(stack) < a:
                raise ValueError(f"operator at position {pos} lacks operands")
            if a == 0:
                stack.append((t,))
            else:
                args = stack[-a:]
                del stack[-a:]
                stack.append((t, *args))
        if len(stack) != 1:
            raise ValueError("incomplete expression")
        return stack[0]
    # prefix: right-to-left stack pass avoids recursion limits
    stack = []
    for pos in range(len(tokens) - 1, -1, -1):
        t = tokens[pos]
        a = table.arity(t)
        if len(stack) < a:
            raise ValueError("incomplete expression")
        if a == 0:
            stack.append((t,))
        else:
            args = [stack.pop() for _ in range(a)]
            stack.append((t, *args))
    if len(stack) != 1:
        raise ValueError("incomplete expression")
    return stack[0]


def from_tree(tree: tuple, notation: str, table: TokenTable) -> ExpressionSeq:
    out: list[int] = []
    postfix = check_notation(notation) == POSTFIX

    def walk(node):
        if not postfix:
            out.append(node[0])
        for child in node[1:]:
            walk(child)
        if postfix:
            out.append(node[0])

    walk(tree)
    return ExpressionSeq(tuple(out), notation, table)


def tree_depth(tree: tuple) -> int:
    if len(tree) == 1:
        return 0
    return 1 + max(tree_depth(c) for c in tree[1:])


def convert_notation(seq: ExpressionSeq) -> ExpressionSeq:
    """The same tree serialized in the other notation."""
    if not seq.is_complete:
        raise ValueError("convert_notation needs a complete expression")
    other = PREFIX if seq.postfix else POSTFIX
    return from_tree(to_tree(seq), other, seq.table)


def to_infix(seq: ExpressionSeq, consts=None) -> str:
    """Fully parenthesized infix string; ``consts`` substitutes constant values."""
    if not seq.is_complete:
        raise ValueError("to_infix needs a complete expression")
    table = seq.table
    cid = table.const_id
    values = iter(consts) if consts is not None else None

    def render(node):
        t = node[0]
        sym = table.symbol(t)
        if len(node) == 1:
            if t == cid and values is not None:
                return f"{next(values):.6g}"
            return sym
        if len(node) == 2:
            return f"{sym}({render(node[1])})"
        left = render(node[1])
        return f"({left} {sym} {render(node[2])})"

    # leaves keep their left-to-right order in both notations, so constants
    # can be consumed in tree order
    return render(to_tree(seq))


# -- text format ------------------------------------------------------------

def format_tokens(seq: ExpressionSeq) -> str:
    return " ".join(seq.table.symbol(t) for t in seq.tokens)


class ParseError(ValueError):
    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


def parse_expression(text: str, notation: str, table: TokenTable) -> ExpressionSeq:
    """Parse whitespace-separated symbols; positions in errors are 0-based."""
    ids = []
    for pos, sym in enumerate(text.split()):
        try:
            ids.append(table.id_of(sym))
        except KeyError:
            raise ParseError(f"unknown token {sym!r} at position {pos}", pos) from None
    if not ids:
        raise ParseError("empty expression", 0)
    return ExpressionSeq(tuple(ids), notation, table)


def read_expression_lines(lines: Iterable[str], default_notation: str | None = None):
    """Split expression text into ``(notation, [token-string lines])``.

    The ``#notation: prefix|postfix`` header may be omitted when a default is given.
    """
    notation = default_notation
    body = []
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            if key.strip() == "notation":
                notation = check_notation(value.strip())
            continue
        body.append(line)
    if notation is None:
        raise ParseError("missing '#notation: prefix|postfix' header")
    return notation, body


def write_expressions(seqs: Iterable[ExpressionSeq], notation: str) -> str:
    lines = [f"#notation: {notation}"]
    lines += [format_tokens(s) for s in seqs]
    return "\n".join(lines) + "\n"


def table_for_symbols(lines: Iterable[str]) -> TokenTable:
    """Smallest permissive table that can spell every symbol in ``lines``."""
    from .tokens import BINARY_OPCODES, CONST_SYMBOL, UNARY_OPCODES

    unary, binary = [], []
    nvars = 1
    for line in lines:
        for pos, sym in enumerate(line.split()):
            if sym in UNARY_OPCODES:
                if sym not in unary:
                    unary.append(sym)
            elif sym in BINARY_OPCODES:
                if sym not in binary:
                    binary.append(sym)
            elif sym.startswith("x") and sym[1:].isdigit() and int(sym[1:]) >= 1:
                nvars = max(nvars, int(sym[1:]))
            elif sym != CONST_SYMBOL:
                raise ParseError(f"unknown token {sym!r} at position {pos}", pos)
    order_u = [s for s in UNARY_OPCODES if s in unary]
    order_b = [s for s in BINARY_OPCODES if s in binary]
    return TokenTable(tuple(order_u), tuple(order_b), nvars, True)
