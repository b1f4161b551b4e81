import numpy as np
import pytest

from stratified import expressions as ex
from stratified.errors import CalibrationFailed, PoleEvaluation
from stratified.fields import p_sub_laplacian
from stratified.gauge import calibrate_c_p, fundamental_solution, gauge_calibrate, reference_domains, weighted_flux
from stratified.geometry import QuadratureRule
from stratified.groups import dilate, preset


@pytest.fixture(scope="module")
def h1_gauge():
    return gauge_calibrate(preset("H1"))


@pytest.fixture(scope="module")
def r3_gauge():
    return gauge_calibrate(preset("R3"))


def test_heisenberg_shape_constant(h1_gauge):
    assert h1_gauge.beta == pytest.approx(16.0, rel=1e-10)
    assert h1_gauge.residual < 1e-8


def test_gauge_is_homogeneous(h1_gauge):
    x = np.random.default_rng(0).uniform(-1, 1, (3, 20))
    a = h1_gauge.evaluate(x)
    b = h1_gauge.evaluate(np.array(dilate(h1_gauge.group, 2.0, x)))
    assert np.allclose(b, 2 * a, rtol=1e-12)


def test_unsupported_group_is_refused():
    with pytest.raises(CalibrationFailed):
        gauge_calibrate(preset("Engel"))


def test_euclidean_newtonian_constant(r3_gauge):
    c = calibrate_c_p(r3_gauge, 2)
    # outward flux +1 makes the constant negative
    assert c == pytest.approx(-1 / (4 * np.pi), rel=1e-6)
    ball, box = reference_domains(r3_gauge)
    rule = QuadratureRule(14)
    for dom in (ball, box):
        assert weighted_flux(r3_gauge.group, dom, r3_gauge.expr(2), 2, rule) == pytest.approx(1.0, abs=1e-6)
    x = np.array([0.4, -0.3, 0.8])
    assert abs(p_sub_laplacian(r3_gauge.group, r3_gauge.expr(2), 2, x)) < 1e-9


def test_heisenberg_constant_and_domain_independence(h1_gauge):
    c = calibrate_c_p(h1_gauge, 2)
    assert c == pytest.approx(-1 / (2 * np.pi), rel=1e-6)
    ball, box = reference_domains(h1_gauge)
    rule = QuadratureRule(14)
    a = weighted_flux(h1_gauge.group, ball, h1_gauge.expr(2), 2, rule)
    b = weighted_flux(h1_gauge.group, box, h1_gauge.expr(2), 2, rule)
    assert a == pytest.approx(b, rel=1e-3)


def test_log_branch_at_p_equal_Q(h1_gauge):
    assert h1_gauge.exponent(h1_gauge.Q) is None
    c = calibrate_c_p(h1_gauge, 4)
    x = np.array([1.0, 0.0, 0.0])
    d = h1_gauge.evaluate(x)
    assert fundamental_solution(h1_gauge, 4, x) == pytest.approx(-c * np.log(d))


@pytest.mark.parametrize("p", [1.5, 2, 3])
def test_power_branch_homogeneity(h1_gauge, p):
    e = h1_gauge.raw_expr(p)
    x = np.array([0.3, -0.6, 0.2])
    lam = 3.0
    ratio = ex.evaluate_at(e, np.array(dilate(h1_gauge.group, lam, x))) / ex.evaluate_at(e, x)
    assert np.log(ratio) / np.log(lam) == pytest.approx(h1_gauge.exponent(p), abs=1e-12)


def test_pole_is_rejected(h1_gauge):
    calibrate_c_p(h1_gauge, 2)
    with pytest.raises(PoleEvaluation):
        fundamental_solution(h1_gauge, 2, np.zeros(3))
