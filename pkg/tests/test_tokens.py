import numpy as np
import pytest

from fixedsr.tokens import Kind, TokenTable


def test_block_layout():
    t = TokenTable(("sin", "cos"), ("+", "*"), 3, True)
    assert t.n_tokens == 2 + 2 + 3 + 1
    assert list(t.unary_ids) == [0, 1]
    assert list(t.binary_ids) == [2, 3]
    assert list(t.leaf_ids) == [4, 5, 6, 7]
    assert t.const_id == 7
    assert [t.symbol(i) for i in range(t.n_tokens)] == ["sin", "cos", "+", "*", "x1", "x2", "x3", "const"]
    assert [t.arity(i) for i in range(t.n_tokens)] == [1, 1, 2, 2, 0, 0, 0, 0]
    assert t.kind(6) is Kind.VARIABLE
    assert t.kind(7) is Kind.CONSTANT


def test_id_of_round_trips():
    t = TokenTable(("sqrt",), ("-", "/", "^"), 2, True)
    for i in range(t.n_tokens):
        assert t.id_of(t.symbol(i)) == i


@pytest.mark.parametrize("sym", ["x0", "x3", "cos", "const", "%", "x"])
def test_id_of_rejects_unknown(sym):
    t = TokenTable(("sqrt",), ("-",), 2, False)
    with pytest.raises(KeyError):
        t.id_of(sym)


def test_without_constant():
    t = TokenTable((), ("+",), 1, False)
    assert t.const_id is None
    assert t.n_leaves == 1


def test_kernel_arrays_are_read_only():
    t = TokenTable(("sin",), ("+",), 1, True)
    assert t.kinds.dtype == np.int32
    with pytest.raises(ValueError):
        t.kinds[0] = 1


@pytest.mark.parametrize("kwargs", [
    dict(unary=("nope",)),
    dict(binary=("%",)),
    dict(unary=("sin", "sin")),
    dict(num_variables=0, has_constant=False),
])
def test_invalid_tables(kwargs):
    with pytest.raises(ValueError):
        TokenTable(**kwargs)


def test_equality_ignores_arrays():
    assert TokenTable(("sin",), ("+",), 2) == TokenTable(("sin",), ("+",), 2)
