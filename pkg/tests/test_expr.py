"""Parser, evaluator and renderer for the expression language."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volterra import expr as ex


def ev(text, **bindings):
    return ex.evaluate(ex.parse(text), bindings)


class TestParseEvaluate:
    def test_precedence_product_over_sum(self):
        assert ev("2+3*4") == 14.0

    def test_exp_identity(self):
        assert ev("exp(0)") == 1.0

    def test_nested_calls(self):
        assert ev("ln(2+abs(-1))") == pytest.approx(math.log(3.0), abs=1e-15)

    def test_zero_factor(self):
        assert ev("t*exp(-(1+t^2))", t=0.0) == 0.0

    def test_product_bindings(self):
        assert ev("x1*x2", x1=0.5, x2=0.25) == 0.125

    def test_cosine_shift(self):
        assert ev("cos(u)+2", u=math.pi) == pytest.approx(1.0, abs=1e-15)

    def test_subtraction_left_associative(self):
        assert ev("2-3-4") == -5.0

    def test_power_right_associative(self):
        assert ev("2^3^2") == 512.0

    def test_unary_minus_binds_looser_than_power(self):
        assert ev("-2^2") == -4.0

    def test_parenthesized_unary(self):
        assert ev("(-2)^2") == 4.0

    def test_constants_fold(self):
        assert ev("pi") == math.pi
        assert ev("e") == math.e
        assert ex.parse("pi") == ex.Num(math.pi)

    def test_scientific_notation(self):
        assert ev("2.5e-2") == 0.025

    def test_division(self):
        assert ev("7/2") == 3.5

    def test_min_max(self):
        assert ev("min(3, 1+1)") == 2.0
        assert ev("max(1, 2, 3)") == 3.0

    def test_variables_collected(self):
        assert ex.variables(ex.parse("x1 * sin(t) + u")) == frozenset(
            {"x1", "t", "u"}
        )

    def test_array_broadcast(self):
        out = ev("x^2 + 1", x=np.array([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(out, [2.0, 5.0, 10.0])


class TestErrors:
    @pytest.mark.parametrize(
        "text", ["", "2 +", "(1", "1 2", "sin()", "min(1)", "x~y", "2..5"]
    )
    def test_parse_errors(self, text):
        with pytest.raises(ex.ParseError):
            ex.parse(text)

    def test_unknown_function(self):
        with pytest.raises(ex.UnknownFunctionError):
            ex.parse("sinh(1)")

    def test_unbound_variable(self):
        with pytest.raises(ex.UnboundVariableError):
            ev("x + 1")

    def test_ln_domain(self):
        with pytest.raises(ex.DomainError):
            ev("ln(-1)")
        with pytest.raises(ex.DomainError):
            ev("ln(0)")

    def test_sqrt_domain(self):
        with pytest.raises(ex.DomainError):
            ev("sqrt(-4)")

    def test_errors_share_base(self):
        for err in (
            ex.ParseError,
            ex.UnknownFunctionError,
            ex.UnboundVariableError,
            ex.DomainError,
        ):
            assert issubclass(err, ex.ExprError)


# random tree construction kept nan-free: bounded functions, integer
# exponents 0..2, no division, so rendered and original trees evaluate to
# bitwise-identical floats

_SAFE_FUNCS = ("sin", "cos", "arctan", "abs")


def _random_tree(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return ex.Num(float(np.round(rng.uniform(-3.0, 3.0), 3)))
        return ex.Var(rng.choice(("x", "y")))
    pick = rng.random()
    if pick < 0.45:
        op = rng.choice(("+", "-", "*"))
        return ex.BinOp(op, _random_tree(rng, depth - 1), _random_tree(rng, depth - 1))
    if pick < 0.6:
        return ex.BinOp(
            "^", _random_tree(rng, depth - 1), ex.Num(float(rng.integers(0, 3)))
        )
    if pick < 0.8:
        return ex.Call(rng.choice(_SAFE_FUNCS), (_random_tree(rng, depth - 1),))
    return ex.Neg(_random_tree(rng, depth - 1))


def test_render_roundtrip_1000_random_trees():
    rng = np.random.default_rng(2024)
    bindings = {"x": 0.7, "y": -1.3}
    for _ in range(1000):
        tree = _random_tree(rng, int(rng.integers(1, 7)))
        text = ex.render(tree)
        again = ex.parse(text)
        left = ex.evaluate(tree, bindings)
        right = ex.evaluate(again, bindings)
        assert left == right, f"{text!r}: {left} != {right}"


@pytest.mark.parametrize(
    "text",
    [
        "x / (1 + y^2)",
        "-(2 + x) * sin(y) ^ 2",
        "min(x, y, 0) - max(x, -y)",
        "exp(-(1 + x^2)) * ln(2 + abs(y))",
    ],
)
def test_render_roundtrip_handpicked(text):
    tree = ex.parse(text)
    again = ex.parse(ex.render(tree))
    bindings = {"x": 0.37, "y": -2.2}
    assert ex.evaluate(again, bindings) == ex.evaluate(tree, bindings)


@given(
    a=st.floats(-50, 50, allow_nan=False),
    b=st.floats(-50, 50, allow_nan=False),
)
@settings(max_examples=60, deadline=None)
def test_sum_matches_python(a, b):
    assert ev("a + b", a=a, b=b) == a + b


@given(x=st.floats(-10, 10, allow_nan=False))
@settings(max_examples=60, deadline=None)
def test_functions_match_numpy(x):
    assert ev("sin(x)", x=x) == np.sin(x)
    assert ev("exp(x)", x=x) == np.exp(x)
    assert ev("abs(x)", x=x) == abs(x)
