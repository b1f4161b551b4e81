import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratified import expressions as ex
from stratified.errors import EvalError, ParseError, UnknownCoordinate


def test_parse_precedence_and_leaves():
    e = ex.parse_expression("x1^2 + x2*x3")
    assert isinstance(e, ex.Add)
    assert isinstance(e.left, ex.Pow) and isinstance(e.right, ex.Mul)
    assert ex.free_variables(e) == {"x1", "x2", "x3"}


def test_incomplete_input_reports_offset():
    with pytest.raises(ParseError) as err:
        ex.parse_expression("x1 +")
    assert err.value.offset == 4


def test_unary_minus_binds_looser_than_division():
    e = ex.parse_expression("-x2/2")
    assert e == ex.Neg(ex.Div(ex.Var("x2"), ex.Num(2)))


def test_coordinate_out_of_range():
    with pytest.raises(UnknownCoordinate):
        ex.parse_expression("x7", n_coords=3)


def test_constant_exponent_is_folded():
    e = ex.parse_expression("rho^(1/2)")
    assert e.exponent == ex.Num(ex.to_fraction(0.5))
    assert ex.evaluate(e, {"rho": np.array([0.0, 4.0])}).tolist() == [0.0, 2.0]


def test_abs_derivative_errors_at_zero():
    d = ex.diff(ex.parse_expression("abs(x1)"), "x1")
    assert ex.evaluate_at(d, np.array([2.0])) == 1.0
    with pytest.raises(EvalError):
        ex.evaluate_at(d, np.array([0.0]))


def test_evaluate_vectorised():
    e = ex.parse_expression("x1*x2")
    assert np.allclose(ex.evaluate_at(e, np.array([[1.0, 2.0], [3.0, 4.0]])), [3.0, 8.0])


_atoms = st.sampled_from(["x1", "x2", "x3", "1", "2", "3/4", "0.5"])


@st.composite
def expr_text(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(_atoms)
    op = draw(st.sampled_from(["+", "-", "*", "/", "^", "neg", "exp", "sin"]))
    a = draw(expr_text(depth=depth - 1))
    if op == "neg":
        return f"-({a})"
    if op in ("exp", "sin"):
        return f"{op}({a})"
    if op == "^":
        return f"({a})^{draw(st.integers(0, 3))}"
    if op == "/":
        return f"({a})/(2 + x1^2)"
    return f"({a}) {op} ({draw(expr_text(depth=depth - 1))})"


@settings(max_examples=200, deadline=None)
@given(expr_text())
def test_print_reparse_round_trip(text):
    e = ex.parse_expression(text)
    assert ex.parse_expression(ex.to_string(e)) == e


@settings(max_examples=200, deadline=None)
@given(expr_text(), st.sampled_from(["x1", "x2", "x3"]),
       st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3))
def test_symbolic_partials_match_central_differences(text, var, x):
    e = ex.parse_expression(text)
    x = np.array(x)
    i = int(var[1]) - 1
    h = 1e-5
    xp, xm = x.copy(), x.copy()
    xp[i] += h
    xm[i] -= h
    fd = (ex.evaluate_at(e, xp) - ex.evaluate_at(e, xm)) / (2 * h)
    exact = ex.evaluate_at(ex.diff(e, var), x)
    assert abs(exact - fd) <= max(1e-6, 1e-6 * abs(exact))
