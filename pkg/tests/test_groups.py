from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratified import expressions as ex
from stratified.fields import apply_vector_field
from stratified.groups import (
    PRESETS, coordinate_field, dilate, group_multiply, hoermander_rank, lie_bracket, preset,
)


@pytest.mark.parametrize("name,Q", [("H1", 4), ("R3", 3), ("Engel", 7), ("H2", 6), ("F2_3", 9)])
def test_homogeneous_dimension(name, Q):
    assert preset(name).Q == Q


def test_dilations():
    assert list(dilate(preset("H1"), 2, [1, 1, 1])) == [2, 2, 4]
    assert list(dilate(preset("Engel"), 3, [1, 0, 1, 1])) == [3, 0, 9, 27]
    x = [0.3, -1.2, 2.0]
    assert np.allclose(dilate(preset("H1"), 1, x), x)


def test_group_law():
    assert list(group_multiply(preset("H1"), [1, 0, 0], [0, 1, 0])) == [1, 1, Fraction(1, 2)]
    assert list(group_multiply(preset("R3"), [1, 2, 3], [4, 5, 6])) == [5, 7, 9]
    for name in PRESETS:
        g = preset(name)
        x = list(range(1, g.N + 1))
        assert list(group_multiply(g, x, [0] * g.N)) == x


def test_brackets():
    g = preset("H1")
    X1, X2 = g.generators
    assert lie_bracket(X1, X2) == coordinate_field(3, 2)
    assert lie_bracket(X1, X1).is_zero()
    assert lie_bracket(coordinate_field(3, 0), coordinate_field(3, 1)).is_zero()


@pytest.mark.parametrize("name,rank", [("H1", 3), ("R3", 3), ("Engel", 4), ("F2_3", 6)])
def test_hoermander_rank_at_origin(name, rank):
    g = preset(name)
    assert hoermander_rank(g, np.zeros(g.N)) == rank


_coord = st.fractions(min_value=-3, max_value=3, max_denominator=8)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(PRESETS), st.lists(_coord, min_size=4, max_size=6),
       st.fractions(min_value=Fraction(1, 4), max_value=4, max_denominator=4),
       st.fractions(min_value=Fraction(1, 4), max_value=4, max_denominator=4))
def test_dilations_compose_and_are_automorphisms(name, coords, a, b):
    g = preset(name)
    x = (coords * 2)[: g.N]
    y = list(reversed(x))
    assert list(dilate(g, a, dilate(g, b, x))) == list(dilate(g, a * b, x))
    lhs = dilate(g, a, group_multiply(g, x, y))
    rhs = group_multiply(g, dilate(g, a, x), dilate(g, a, y))
    assert list(lhs) == list(rhs)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["H1", "Engel", "F2_3"]), st.lists(_coord, min_size=6, max_size=6))
def test_generators_are_left_invariant(name, coords):
    g = preset(name)
    y = coords[: g.N]
    x = np.linspace(-0.7, 0.9, g.N)
    # f(z) = z_N^2 + z_1 z_N, composed with left translation by y
    f = ex.parse_expression(f"x{g.N}^2 + x1*x{g.N}")
    shifted = g.law.multiply([ex.Num(c) for c in y], [ex.coordinate(i) for i in range(g.N)])
    f_y = ex.substitute(f, {f"x{i + 1}": s for i, s in enumerate(shifted)})
    yx = np.array([float(v) for v in group_multiply(g, y, x)])
    for k in range(g.N1):
        lhs = ex.evaluate_at(apply_vector_field(g, k, f_y), x)
        rhs = ex.evaluate_at(apply_vector_field(g, k, f), yx)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_generators_are_homogeneous_of_degree_one():
    # X_k(u o delta_lam) = lam (X_k u) o delta_lam
    g = preset("Engel")
    u = ex.parse_expression("x4 + x3*x1 + x2^3")
    lam = 2.0
    dl = [ex.mul(ex.Num(ex.to_fraction(lam**w)), ex.coordinate(i)) for i, w in enumerate(g.weights)]
    u_lam = ex.substitute(u, {f"x{i + 1}": d for i, d in enumerate(dl)})
    x = np.array([0.3, -0.4, 0.5, 0.1])
    for k in range(g.N1):
        lhs = ex.evaluate_at(apply_vector_field(g, k, u_lam), x)
        rhs = lam * ex.evaluate_at(apply_vector_field(g, k, u), np.array(dilate(g, lam, x), dtype=float))
        assert lhs == pytest.approx(rhs, rel=1e-12)
