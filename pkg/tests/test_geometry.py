from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratified import expressions as ex
from stratified.gauge import gauge_calibrate
from stratified.geometry import (
    Box, BoxFace, GaugeBall, QuadratureRule, boundary_form_integral, divergence_residual, energy_seminorm,
    volume_integral,
)
from stratified.groups import preset


def test_volume_integrals(h1, r3):
    rule = QuadratureRule(4)
    assert volume_integral(r3, Box([0] * 3, [1] * 3), ex.ONE, rule) == pytest.approx(1.0, abs=1e-15)
    val = volume_integral(h1, Box([0] * 3, [1] * 3), ex.parse_expression("x1*x2"), rule)
    assert val == pytest.approx(0.25, abs=1e-14)


def test_gauge_ball_volume_scales_with_Q(h1):
    pg = gauge_calibrate(h1)
    rule = QuadratureRule(10)
    v1 = volume_integral(h1, GaugeBall(h1, pg.d, np.zeros(3), 1.0), ex.ONE, rule)
    v2 = volume_integral(h1, GaugeBall(h1, pg.d, np.zeros(3), 2.0), ex.ONE, rule)
    assert v2 / v1 == pytest.approx(2.0**h1.Q, rel=5e-3)


def test_boundary_form_examples(h1, r3):
    rule = QuadratureRule(4)
    box = Box([0] * 3, [1] * 3)
    assert boundary_form_integral(r3, box, 0, ex.ONE, rule) == pytest.approx(0.0, abs=1e-15)
    assert boundary_form_integral(r3, box, 0, ex.parse_expression("x1"), rule) == pytest.approx(1.0, abs=1e-14)
    assert boundary_form_integral(h1, box, 0, ex.parse_expression("x3"), rule) == pytest.approx(-0.25, abs=1e-12)


def test_divergence_residual_examples(h1):
    box = Box([-0.5, 0.0, -1.0], [1.0, 0.75, 0.5])
    fields = ["x1^2*x3 - x2*x3^2", "x1*x2*x3 + x3^3"]
    assert divergence_residual(h1, box, fields, QuadratureRule(4)) < 1e-12
    assert divergence_residual(h1, box, ["2", "-3"], QuadratureRule(2)) < 1e-14
    smooth = ["exp(x1*x3)", "sin(x2 + x3^2)"]
    res = [divergence_residual(h1, box, smooth, QuadratureRule(o)) for o in (4, 6, 8)]
    assert res[0] > res[1] > res[2] or res[2] < 1e-14


def test_energy_seminorm_examples(h1):
    rule = QuadratureRule(4)
    r1 = preset("R1")
    for p in (1.5, 2, 3):
        assert energy_seminorm(r1, Box([0.0], [1.0]), ex.parse_expression("x1"), p, rule) == pytest.approx(1.0)
    assert energy_seminorm(h1, Box([0] * 3, [1] * 3), ex.parse_expression("2"), 2, rule) == 0.0
    val = energy_seminorm(h1, Box([0] * 3, [1] * 3), ex.parse_expression("x3"), 2, rule)
    assert val == pytest.approx(np.sqrt(1 / 6), abs=1e-12)


@pytest.mark.parametrize("order", [1, 3, 6, 10])
def test_gauss_exactness(order):
    rule = QuadratureRule(order)
    U, W = rule.tensor(1)
    for k in range(2 * order):
        exact = 1.0 / (k + 1)
        assert np.dot(W, U[0] ** k) == pytest.approx(exact, rel=1e-13)


def test_orientation_flip_leaves_integrals_unchanged(h1):
    box = Box([-1.0, 0.0, 0.5], [0.5, 1.0, 1.5])
    rule = QuadratureRule(5)
    f = ex.parse_expression("x1*x3 + x2^2")
    flipped = SimpleNamespace(N=3, patches=[p.flipped() for p in box.patches])
    for k in range(h1.N1):
        a = boundary_form_integral(h1, box, k, f, rule)
        b = boundary_form_integral(h1, flipped, k, f, rule)
        assert b == pytest.approx(a, abs=1e-13)
    assert all(isinstance(p, BoxFace) for p in flipped.patches)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2), st.floats(0.1, 0.9))
def test_split_additivity(axis, frac):
    g = preset("H1")
    box = Box([-1.0, -0.5, 0.0], [1.0, 0.5, 1.0])
    at = box.lo[axis] + frac * (box.hi[axis] - box.lo[axis])
    left, right = box.split(axis, at)
    f = ex.parse_expression("x1^2*x3 + x2*x3 - x1")
    rule = QuadratureRule(4)
    for k in range(g.N1):
        whole = boundary_form_integral(g, box, k, f, rule)
        parts = boundary_form_integral(g, left, k, f, rule) + boundary_form_integral(g, right, k, f, rule)
        assert parts == pytest.approx(whole, abs=1e-11)
