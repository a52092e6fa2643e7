from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lightlike.calculus.expr import (
    DomainError,
    ParseError,
    add,
    cos,
    diff,
    evaluate,
    exp,
    mul,
    parse,
    sin,
    to_string,
    var,
)
from lightlike.calculus.fields import fd_crosscheck

t, u1, u2 = var("t"), var("u1"), var("u2")


def test_derivative_of_exponential():
    e = exp(2 * t)
    assert diff(e, "t") is mul(2.0, exp(2 * t))
    assert evaluate(diff(e, "t"), t=0.3) == pytest.approx(2 * math.exp(0.6), rel=1e-15)


def test_conformal_factor_derivative_vanishes_at_origin():
    e = 4 * (1 + u1 * u1 + u2 * u2) ** -2
    assert evaluate(diff(e, "u1"), u1=0.0, u2=0.0) == 0.0
    # d/du1 at (0.5, 0): -16 u1 (1+u1²)^-3
    assert evaluate(diff(e, "u1"), u1=0.5, u2=0.0) == pytest.approx(-8 / 1.25**3, rel=1e-14)


def test_sine_derivative():
    assert evaluate(diff(sin(t), "t"), t=0.0) == 1.0
    assert diff(cos(t), "t") is mul(-1.0, sin(t))


def test_derivative_of_independent_expression_is_zero():
    assert diff(exp(u1), "t").is_zero()


def test_fd_crosscheck_examples():
    assert fd_crosscheck(exp(2 * t), "t", {"t": 0.3}) < 1e-8
    assert fd_crosscheck(parse("3.5"), "t", {"t": 0.3}) == 0.0
    with pytest.raises(DomainError):
        fd_crosscheck(u1**-1, "u1", {"u1": 1e-7})


def test_hash_consing_shares_nodes():
    a = add(mul(t, u1), exp(t))
    b = add(exp(t), mul(u1, t))
    assert a is b
    assert parse("t*u1 + exp(t)") is a


def test_parse_error_reports_column():
    with pytest.raises(ParseError, match="column 5"):
        parse("t + $", ["t"])
    with pytest.raises(ParseError, match="unknown coordinate"):
        parse("t + q", ["t"])


def test_evaluate_outside_domain():
    with pytest.raises(DomainError):
        evaluate(t**-1, t=0.0)


names = st.sampled_from(["t", "u1", "u2"])


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        if draw(st.booleans()):
            return var(draw(names))
        return parse(repr(draw(st.floats(-3, 3, allow_nan=False).map(lambda x: round(x, 3)))))
    kind = draw(st.sampled_from(["add", "mul", "exp", "sin", "cos", "pow"]))
    a = draw(expressions(depth=depth - 1))
    if kind == "add":
        return add(a, draw(expressions(depth=depth - 1)))
    if kind == "mul":
        return mul(a, draw(expressions(depth=depth - 1)))
    if kind == "pow":
        return a ** draw(st.integers(2, 3))
    return {"exp": exp, "sin": sin, "cos": cos}[kind](mul(0.3, a))


@given(expressions())
def test_print_parse_round_trip(e):
    assert parse(to_string(e)) is e


@given(expressions(), names, st.lists(st.floats(-0.8, 0.8), min_size=3, max_size=3))
def test_symbolic_derivative_matches_finite_differences(e, name, xs):
    point = dict(zip(["t", "u1", "u2"], xs))
    assert fd_crosscheck(e, name, point) < 1e-5


@given(expressions(), expressions())
def test_derivative_is_linear(a, b):
    lhs = diff(add(a, mul(2.0, b)), "t")
    rhs = add(diff(a, "t"), mul(2.0, diff(b, "t")))
    pt = {"t": 0.2, "u1": -0.1, "u2": 0.4}
    assert evaluate(lhs, pt) == pytest.approx(evaluate(rhs, pt), rel=1e-12, abs=1e-12)


def test_vectorized_evaluation_matches_scalar():
    from lightlike.calculus.expr import Evaluator

    xs = np.linspace(-1, 1, 7)
    e = add(sin(t), mul(t, t))
    vals = Evaluator({"t": xs})(e)
    assert np.allclose(vals, [evaluate(e, t=x) for x in xs], rtol=0, atol=1e-15)
