import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratified import expressions as ex
from stratified.fields import (
    Horizontal, apply_vector_field, horizontal_gradient, infinity_sub_laplacian, p_sub_laplacian,
    weighted_gradient_pairing,
)
from stratified.groups import coordinate_field, preset


def _s(e):
    return ex.to_string(e)


def test_apply_vector_field(h1):
    assert ex.evaluate_at(apply_vector_field(h1, 0, ex.parse_expression("x3")), np.array([0.0, 3.0, 0.0])) == -1.5
    assert apply_vector_field(h1, 1, ex.parse_expression("7")) == ex.ZERO
    r1 = preset("R1")
    d = apply_vector_field(r1, coordinate_field(1, 0), ex.parse_expression("x1^2"))
    assert ex.evaluate_at(d, np.array([1.5])) == 3.0


def test_horizontal_gradient(h1):
    assert np.allclose(horizontal_gradient(h1, "x3", np.array([0.0, 2.0, 0.0])), [-1.0, 0.0])
    assert np.allclose(horizontal_gradient(h1, "5", np.array([1.0, 2.0, 3.0])), 0.0)
    assert np.allclose(horizontal_gradient(preset("R2"), "x1^2 + x2^2", np.array([1.0, 1.0])), [2.0, 2.0])


def test_p_sub_laplacian_examples(h1):
    x = np.array([0.3, -0.2, 0.7])
    assert p_sub_laplacian(preset("R2"), "x1^2 + x2^2", 2, x[:2]) == pytest.approx(4.0)
    assert p_sub_laplacian(h1, "x3", 2, x) == pytest.approx(0.0, abs=1e-15)
    assert p_sub_laplacian(preset("R1"), "x1^2", 3, np.array([1.0])) == pytest.approx(8.0)


def test_pairing_examples(h1):
    x = np.array([0.0, 2.0, 0.0])
    assert weighted_gradient_pairing(h1, "x1", "x3", x, 2) == pytest.approx(-1.0)
    assert weighted_gradient_pairing(h1, "x1^2*x3", "4", x, 3) == 0.0
    u = "x1*x2 + x3"
    y = np.array([0.4, 0.1, -0.3])
    assert weighted_gradient_pairing(h1, u, u, y, 2) == pytest.approx(np.sum(horizontal_gradient(h1, u, y) ** 2))


def test_infinity_laplacian_examples():
    d = ex.parse_expression("(x1^2 + x2^2)^(1/2)")
    assert infinity_sub_laplacian(preset("R2"), d, np.array([1.0, 0.0])) == pytest.approx(0.0, abs=1e-15)
    assert infinity_sub_laplacian(preset("R2"), "3", np.array([1.0, 0.0])) == 0.0


_x = st.lists(st.floats(-1, 1), min_size=3, max_size=3)


@settings(max_examples=50, deadline=None)
@given(_x)
def test_p2_matches_sum_of_squares(x):
    g = preset("H1")
    u = ex.parse_expression("x1^3 + x1*x3 - x2^2*x3 + x2")
    x = np.array(x)
    second = Horizontal(g, u).second
    direct = sum(ex.evaluate_at(second[k][k], x) for k in range(g.N1))
    assert p_sub_laplacian(g, u, 2, x) == pytest.approx(direct, abs=1e-10)


def test_eps_regularisation_converges(h1):
    u = ex.parse_expression("x1 + x1*x3 + x2^2")
    x = np.array([0.2, 0.5, -0.1])
    vals = [p_sub_laplacian(h1, u, 3, x, eps) for eps in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)]
    diffs = np.abs(np.diff(vals))
    assert np.all(diffs[1:] <= diffs[:-1] + 1e-15)
    assert diffs[-1] < 1e-12
