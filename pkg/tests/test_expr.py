import math

import numpy as np
import pytest

from fractrans.expr import EvalError, ParseError, differentiate, evaluate, parse


def central_fd(e, variable, x1, x2, step=1e-5):
    if variable == "x1":
        return (evaluate(e, x1 + step, x2) - evaluate(e, x1 - step, x2)) / (2 * step)
    return (evaluate(e, x1, x2 + step) - evaluate(e, x1, x2 - step)) / (2 * step)


def test_parse_and_evaluate_basics():
    assert evaluate(parse("x1^2 + exp(-x2)"), 1.0, 0.0) == pytest.approx(2.0)
    assert evaluate(parse("x1*x2"), 3.0, 2.0) == pytest.approx(6.0)
    assert evaluate(parse("x2^(1/2)"), 0.0, 4.0) == pytest.approx(2.0)
    assert evaluate(parse("exp(x1)"), 1.0, 0.0) == pytest.approx(math.e)


def test_algebraic_identity_on_random_points():
    lhs = parse("2*x1 - x1")
    rhs = parse("x1")
    rng = np.random.default_rng(7)
    pts = rng.uniform(-5, 5, size=(50, 2))
    for x1, x2 in pts:
        assert evaluate(lhs, x1, x2) == pytest.approx(evaluate(rhs, x1, x2))


def test_precedence_and_associativity():
    assert evaluate(parse("2 + 3 * 4"), 0, 0) == 14.0
    assert evaluate(parse("2 - 3 - 4"), 0, 0) == -5.0
    assert evaluate(parse("12 / 3 / 2"), 0, 0) == 2.0
    assert evaluate(parse("2^3^2"), 0, 0) == 512.0  # right associative
    assert evaluate(parse("-2^2"), 0, 0) == -4.0  # ^ binds tighter than unary minus
    assert evaluate(parse("-2*3"), 0, 0) == -6.0
    assert evaluate(parse("2^-1"), 0, 0) == 0.5


def test_vectorized_evaluation_broadcasts():
    e = parse("x1 + 2*x2")
    x1 = np.array([0.0, 1.0, 2.0])
    out = evaluate(e, x1, 1.0)
    np.testing.assert_allclose(out, x1 + 2.0)


def test_parse_errors_carry_position():
    with pytest.raises(ParseError):
        parse("")
    with pytest.raises(ParseError) as err:
        parse("x1 + unknown_name")
    assert "unknown identifier" in str(err.value)
    with pytest.raises(ParseError):
        parse("x1 + ")
    with pytest.raises(ParseError):
        parse("(x1 + x2")
    with pytest.raises(ParseError):
        parse("x1 $ x2")


def test_domain_violations_are_errors_not_nan():
    with pytest.raises(EvalError) as err:
        evaluate(parse("1/x1"), 0.0, 0.0)
    assert "division by zero" in str(err.value)
    with pytest.raises(EvalError):
        evaluate(parse("log(x1)"), -1.0, 0.0)
    with pytest.raises(EvalError):
        evaluate(parse("sqrt(x1)"), -1.0, 0.0)
    with pytest.raises(EvalError):
        evaluate(parse("(-1)^(1/2)"), 0.0, 0.0)
    with pytest.raises(EvalError):
        evaluate(parse("exp(x1)"), 1e4, 0.0)  # overflow must not return inf
    # array input: a single bad point poisons the call
    with pytest.raises(EvalError):
        evaluate(parse("log(x2)"), 0.0, np.array([1.0, 0.0, 2.0]))


def test_differentiate_simple_rules():
    assert str(differentiate(parse("x1*x2"), "x1")) == "x2"
    d = differentiate(parse("exp(-x2)"), "x2")
    assert evaluate(d, 0.0, 0.0) == pytest.approx(-1.0)
    d3 = differentiate(parse("x1^3"), "x1")
    assert evaluate(d3, 2.0, 0.0) == pytest.approx(12.0)
    assert abs(evaluate(d3, 2.0, 0.0) - central_fd(parse("x1^3"), "x1", 2.0, 0.0)) < 1e-6


def test_differentiate_abs_flags_nonsmooth_point():
    d = differentiate(parse("abs(x1)"), "x1")
    assert evaluate(d, 2.0, 0.0) == 1.0
    assert evaluate(d, -2.0, 0.0) == -1.0
    with pytest.raises(EvalError):
        evaluate(d, 0.0, 0.0)


SMOOTH_EXPRESSIONS = [
    "x1^2 + exp(-x2)",
    "sin(x1)*cos(x2)",
    "exp(x1*x2/10)",
    "sqrt(x1^2 + x2^2 + 1)",
    "(x1 + 2)/(x2^2 + 1)",
    "log(x1^2 + 1)",
    "x1^3 - 2*x1*x2 + x2^2",
    "cos(x1^2)/(2 + sin(x2))",
]


@pytest.mark.parametrize("text", SMOOTH_EXPRESSIONS)
def test_derivative_matches_central_difference(text):
    e = parse(text)
    rng = np.random.default_rng(42)
    pts = rng.uniform(-2, 2, size=(100, 2))
    for variable in ("x1", "x2"):
        d = differentiate(e, variable)
        for x1, x2 in pts:
            fd = central_fd(e, variable, x1, x2)
            got = evaluate(d, x1, x2)
            assert abs(got - fd) <= 1e-6 * (1.0 + abs(fd))


@pytest.mark.parametrize("text", SMOOTH_EXPRESSIONS + ["-x1^2", "2^-x2", "1 - (x1 - x2) - 1"])
def test_print_parse_round_trip(text):
    e = parse(text)
    e2 = parse(str(e))
    rng = np.random.default_rng(3)
    pts = rng.uniform(-2, 2, size=(100, 2))
    for x1, x2 in pts:
        assert evaluate(e2, x1, x2) == pytest.approx(evaluate(e, x1, x2), rel=1e-14, abs=1e-14)
