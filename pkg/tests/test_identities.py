import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratified import expressions as ex
from stratified.errors import InadmissibleNonlinearity
from stratified.gauge import gauge_calibrate
from stratified.geometry import Box, QuadratureRule, bump, divergence_residual
from stratified.groups import preset
from stratified.identities import (
    AdmissibleNonlinearity, PiconePair, boundary_condition_residual, canonical_nonlinearity, diaz_saa_gap,
    green_first_fields, green_first_residual, green_second_residual, hardy_gap, horizontal_flux, picone_scan,
    representation_residual,
)

UNIT = Box([0.0] * 3, [1.0] * 3)


def test_green_first_classical():
    rep = green_first_residual(preset("R1"), Box([0.0], [1.0]), "x1^2", "1", 2, QuadratureRule(4))
    assert rep.lhs == pytest.approx(2.0) and rep.rhs == pytest.approx(2.0)
    assert rep.residual < 1e-14


def test_green_first_heisenberg_polynomials(h1):
    rep = green_first_residual(h1, UNIT, "x1^2*x3 - x2 + x3^3", "x1*x2*x3 + 1", 2, QuadratureRule(6))
    assert rep.residual < 1e-10


def test_green_first_p3_refines(h1):
    res = [green_first_residual(h1, UNIT, "x1 + 2*x2 + x3", "x1*x2", 3, QuadratureRule(o)).residual
           for o in (4, 8, 12)]
    assert res[-1] < 1e-8


def test_green_first_is_a_divergence_identity(h1):
    u, v, p = "x1 + x2*x3", "1 + x1*x2", 3
    rule = QuadratureRule(8)
    rep = green_first_residual(h1, UNIT, u, v, p, rule)
    fields = green_first_fields(h1, ex.parse_expression(u), ex.parse_expression(v), p)
    assert rep.residual == pytest.approx(divergence_residual(h1, UNIT, fields, rule), abs=1e-12)


def test_green_second_examples(h1):
    rule = QuadratureRule(6)
    assert green_second_residual(h1, UNIT, "x1*x3", "x1*x3", 2, rule).residual < 1e-14
    assert green_second_residual(preset("R2"), Box([0.0] * 2, [1.0] * 2), "x1^2 - x2^2", "x1*x2", 2,
                                 rule).residual < 1e-12
    rep = green_second_residual(h1, UNIT, "x1^2", "x2^2", 2, rule)
    assert rep.residual < 1e-10
    assert rep.extra["antisymmetry"] < 1e-10


def test_horizontal_flux_examples(h1):
    rule = QuadratureRule(10)
    assert horizontal_flux(h1, UNIT, ex.parse_expression("3"), 2, rule) == 0.0
    pg = gauge_calibrate(h1)
    outside = horizontal_flux(h1, Box([-1.0] * 3, [1.0] * 3, 2), pg.expr(2, pole=np.array([2.0, 0.0, 0.0])), 2,
                              QuadratureRule(12))
    assert abs(outside) < 1e-6


def test_picone_equality_case():
    g = preset("R3")
    af = canonical_nonlinearity(2.5)
    P = PiconePair(g, "1 + x1^2", "1 + x1^2", af)
    x = np.random.default_rng(1).uniform(-1, 1, (3, 50))
    assert np.allclose(P.R(x), 0.0, atol=1e-13)


def test_picone_hand_example():
    P = PiconePair(preset("R1"), "x1 + 1", "1 + x1^2", AdmissibleNonlinearity("t", 2))
    x = np.array([1.0])
    assert P.L(x) == pytest.approx(1.0) and P.R(x) == pytest.approx(1.0)


def test_picone_constant_u():
    g = preset("R1")
    af = AdmissibleNonlinearity("t + 1", 2)
    P = PiconePair(g, "3", "1 + x1^2", af)
    x = np.array([0.7])
    f, df = af.value(1 + x**2), af.derivative(1 + x**2)
    assert P.L(x) == pytest.approx((df * 9 * (2 * x) ** 2 / f**2)[0])


def test_picone_scan_heisenberg(h1):
    af = canonical_nonlinearity(2.5)
    rep = picone_scan(h1, Box([-1.0] * 3, [1.0] * 3), "x1^2*x3 - x2 + 1/2", "1 + x1^2 + x2^2", af, 10_000, 7)
    assert rep.passed


def test_admissibility():
    p = 2.5
    af = canonical_nonlinearity(p)
    t = np.logspace(-3, 3, 7)
    assert np.allclose((p - 1) * af.value(t) ** ((p - 2) / (p - 1)), af.derivative(t))
    with pytest.raises(InadmissibleNonlinearity):
        AdmissibleNonlinearity("t^3", p)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([1.5, 2.0, 3.0]), st.integers(0, 10_000))
def test_picone_L_equals_R_and_R_nonnegative(p, seed):
    g = preset("H1")
    rng = np.random.default_rng(seed)
    a, b, c = rng.integers(-4, 5, 3) / 4
    u = f"{a}*x1^2 + {b}*x2*x3 + {c} + 2"  # keep u away from the kink of abs
    af = canonical_nonlinearity(p)
    P = PiconePair(g, u, "2 + x1/2 + x2^2/8", af)
    x = rng.uniform(-1, 1, (3, 40))
    L, R = P.L(x), P.R(x)
    assert np.allclose(L, R, atol=1e-9 * (1 + np.max(np.abs(L))))
    assert np.min(R) >= -1e-9


def test_hardy_gap_examples(h1):
    rule = QuadratureRule(8)
    af = AdmissibleNonlinearity("t", 2)
    assert hardy_gap(h1, UNIT, "0", "2 + x1^2", af, 2, rule) == pytest.approx(0.0, abs=1e-15)
    assert hardy_gap(h1, UNIT, "1", "2 + x1^2", af, 2, rule) >= -1e-9


def test_diaz_saa_examples(h1):
    rule = QuadratureRule(8)
    b = bump(UNIT)
    u1 = ex.add(ex.ONE, b)
    assert diaz_saa_gap(h1, UNIT, u1, u1, 2, rule) == pytest.approx(0.0, abs=1e-14)
    assert diaz_saa_gap(h1, UNIT, u1, ex.mul(ex.Num(2), u1), 2, rule) == pytest.approx(0.0, abs=1e-12)
    u2 = ex.add(ex.ONE, ex.mul(ex.Num(2), ex.power(b, ex.Num(2))))
    assert diaz_saa_gap(h1, UNIT, u1, u2, 2, rule) >= -1e-8


def test_boundary_condition_residuals(h1):
    rule = QuadratureRule(6)
    assert boundary_condition_residual(h1, UNIT, "0", "dirichlet", rule) == 0.0
    assert boundary_condition_residual(h1, UNIT, "1", "neumann", rule) == 0.0
    assert boundary_condition_residual(h1, UNIT, "x3", "neumann", rule) > 0.0


def test_representation_residuals(h1):
    rule = QuadratureRule(8)
    box = Box([-1.0] * 3, [1.0] * 3, 4)
    pg3 = gauge_calibrate(preset("R3"))
    assert representation_residual(pg3, pg3.group, box, "x1^2 - x2^2 + x3", 2, np.array([0.1, 0.2, -0.1]),
                                   rule) < 1e-4
    pg = gauge_calibrate(h1)
    assert representation_residual(pg, h1, box, "x1", 2, np.zeros(3), rule) < 1e-3
    assert representation_residual(pg, h1, box, "0", 2, np.zeros(3), rule) < 1e-10
