"""Token inventory shared by the grammars, the evaluator and the text format.

Token ids are laid out in three contiguous blocks::

    [0, N_U)              unary operators
    [N_U, N_U + N_B)      binary operators
    [N_U + N_B, N_T)      leaves: variables x1..xD, then ``const`` if present

Every legal-token set the grammars produce is a union of whole blocks, so a
"legal set" is fully described by three booleans.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

import numpy as np

CONST_SYMBOL = "const"

# Opcodes understood by the evaluation kernels.
UNARY_OPCODES = {
    "sin": 0,
    "cos": 1,
    "sqrt": 2,
    "exp": 3,
    "log": 4,
    "tan": 5,
    "neg": 6,
    "abs": 7,
}
BINARY_OPCODES = {
    "+": 0,
    "-": 1,
    "*": 2,
    "/": 3,
    "^": 4,
}


class Kind(IntEnum):
    UNARY = 0
    BINARY = 1
    VARIABLE = 2
    CONSTANT = 3


ARITY = {Kind.UNARY: 1, Kind.BINARY: 2, Kind.VARIABLE: 0, Kind.CONSTANT: 0}


class Token(NamedTuple):
    id: int
    kind: Kind
    symbol: str

    @property
    def arity(self) -> int:
        return ARITY[self.kind]


@dataclass(frozen=True)
class TokenTable:
    """Unary and binary operators plus the leaf set (variables and ``const``)."""

    unary: tuple[str, ...] = ()
    binary: tuple[str, ...] = ()
    num_variables: int = 1
    has_constant: bool = True
    # kind code per token id (0 unary, 1 binary, 2 variable, 3 constant) and
    # opcode / variable index per token id; consumed by the kernels
    kinds: np.ndarray = field(init=False, repr=False, compare=False)
    args: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "unary", tuple(self.unary))
        object.__setattr__(self, "binary", tuple(self.binary))
        for sym in self.unary:
            if sym not in UNARY_OPCODES:
                raise ValueError(f"unknown unary operator {sym!r}")
        for sym in self.binary:
            if sym not in BINARY_OPCODES:
                raise ValueError(f"unknown binary operator {sym!r}")
        if len(set(self.unary)) != len(self.unary) or len(set(self.binary)) != len(self.binary):
            raise ValueError("duplicate operator symbols")
        if self.num_variables < 0:
            raise ValueError("num_variables must be non-negative")
        if self.n_leaves < 1:
            raise ValueError("a token table needs at least one leaf")

        kinds = [Kind.UNARY] * self.n_unary + [Kind.BINARY] * self.n_binary
        kinds += [Kind.VARIABLE] * self.num_variables
        args = [UNARY_OPCODES[s] for s in self.unary] + [BINARY_OPCODES[s] for s in self.binary]
        args += list(range(self.num_variables))
        if self.has_constant:
            kinds.append(Kind.CONSTANT)
            args.append(0)
        k = np.asarray(kinds, dtype=np.int32)
        a = np.asarray(args, dtype=np.int32)
        k.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "kinds", k)
        object.__setattr__(self, "args", a)

    @property
    def n_unary(self) -> int:
        return len(self.unary)

    @property
    def n_binary(self) -> int:
        return len(self.binary)

    @property
    def n_leaves(self) -> int:
        return self.num_variables + (1 if self.has_constant else 0)

    @property
    def n_tokens(self) -> int:
        return self.n_unary + self.n_binary + self.n_leaves

    @property
    def const_id(self) -> int | None:
        return self.n_tokens - 1 if self.has_constant else None

    def kind(self, tid: int) -> Kind:
        if not 0 <= tid < self.n_tokens:
            raise ValueError(f"token id {tid} out of range")
        return Kind(int(self.kinds[tid]))

    def arity(self, tid: int) -> int:
        if tid < self.n_unary:
            return 1
        if tid < self.n_unary + self.n_binary:
            return 2
        return 0

    def symbol(self, tid: int) -> str:
        nu, nb = self.n_unary, self.n_binary
        if tid < 0 or tid >= self.n_tokens:
            raise ValueError(f"token id {tid} out of range")
        if tid < nu:
            return self.unary[tid]
        if tid < nu + nb:
            return self.binary[tid - nu]
        v = tid - nu - nb
        if v < self.num_variables:
            return f"x{v + 1}"
        return CONST_SYMBOL

    def token(self, tid: int) -> Token:
        return Token(tid, self.kind(tid), self.symbol(tid))

    def id_of(self, symbol: str) -> int:
        if symbol in self.unary:
            return self.unary.index(symbol)
        if symbol in self.binary:
            return self.n_unary + self.binary.index(symbol)
        base = self.n_unary + self.n_binary
        if symbol == CONST_SYMBOL and self.has_constant:
            return self.n_tokens - 1
        if symbol.startswith("x") and symbol[1:].isdigit():
            v = int(symbol[1:])
            if 1 <= v <= self.num_variables:
                return base + v - 1
        raise KeyError(symbol)

    def is_leaf(self, tid: int) -> bool:
        return tid >= self.n_unary + self.n_binary

    @property
    def unary_ids(self) -> range:
        return range(0, self.n_unary)

    @property
    def binary_ids(self) -> range:
        return range(self.n_unary, self.n_unary + self.n_binary)

    @property
    def leaf_ids(self) -> range:
        return range(self.n_unary + self.n_binary, self.n_tokens)
