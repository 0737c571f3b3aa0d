import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hkts.exprlang import (
    BinOp,
    EvalError,
    ParseError,
    Vector,
    compile_expr,
    dim_of,
    eval_array,
    evaluate,
    free_vars,
    parse,
    to_source,
)
from hkts.riesz import LatticeElement


def at(text, t):
    return float(eval_array(parse(text), [t])[0, 0])


def test_examples():
    node = parse("t^2")
    assert isinstance(node, BinOp) and node.op == "^"
    assert at("t^2", 3.0) == 9.0
    v = parse("[t, 1]")
    assert isinstance(v, Vector) and dim_of(v) == 2
    assert evaluate(v, 0.5) == LatticeElement.of(0.5, 1.0)
    assert at("piecewise(t < 0.5, 0, 1)", 0.5) == 1.0
    assert at("abs(-t)", 2.0) == 2.0


def test_parse_error_offset():
    with pytest.raises(ParseError) as e:
        parse("t +")
    assert e.value.offset == 3 and e.value.expected == "operand"


def test_unknown_identifier_rejected():
    with pytest.raises(ParseError):
        parse("s + 1")


def test_arity_checked():
    with pytest.raises(ParseError):
        parse("sin(t, t)")
    with pytest.raises(ParseError):
        parse("piecewise(t < 1, 2)")


def test_nested_vector_rejected():
    with pytest.raises(ParseError):
        parse("[t, [t, 1]]")


def test_free_vars():
    assert free_vars(parse("t+1")) == {"t"}
    assert free_vars(parse("2")) == set()


def test_precedence():
    assert at("2^3^2", 0.0) == 512.0
    assert at("-t^2", 3.0) == 9.0
    assert at("1 + 2 * 3", 0.0) == 7.0
    assert at("8 / 4 / 2", 0.0) == 1.0


def test_domain_errors():
    with pytest.raises(EvalError):
        eval_array(parse("log(t)"), [0.0])
    with pytest.raises(EvalError):
        eval_array(parse("1/t"), [0.0])
    with pytest.raises(EvalError):
        eval_array(parse("sqrt(t)"), [-1.0])
    with pytest.raises(EvalError):
        eval_array(parse("exp(t)"), [1e6])


def test_piecewise_guards_branch():
    # the 1/t branch never sees t = 0
    f = compile_expr("piecewise(t = 0, 0, 1/t)")
    assert f.values(np.array([0.0, 2.0])).ravel().tolist() == [0.0, 0.5]


def test_compile_dims():
    assert compile_expr("[t, t^2, 1]").space.dim == 3
    assert compile_expr("sin(t)").space.dim == 1


leaf = st.one_of(st.just("t"), st.integers(0, 9).map(str))


def _expr(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda p: f"({p[0]} {p[1]} {p[2]})"),
        children.map(lambda c: f"sin({c})"),
        children.map(lambda c: f"-{c}"),
        st.tuples(children, children, children).map(lambda p: f"piecewise({p[0]} < 1, {p[1]}, {p[2]})"),
    )


exprs = st.recursive(leaf, _expr, max_leaves=12)


@given(exprs)
def test_source_roundtrip(text):
    node = parse(text)
    assert parse(to_source(node)) == node


@given(exprs, st.floats(-3, 3))
def test_vector_matches_scalar(text, t):
    a = eval_array(parse(text), [t])[0, 0]
    b = evaluate(parse(text), t).coords[0]
    assert a == b or (math.isnan(a) and math.isnan(b))
