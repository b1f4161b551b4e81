import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratified.errors import NonPositiveEps, ReactionAssumptionError, TooCoarse
from stratified.geometry import Box
from stratified.groups import preset
from stratified.solver import (
    NodalLoad, Reaction, SolveOptions, direct_solve_p2, discrete_energy, discrete_operator, discretize,
    horizontal_gradient_h, require_reaction_flags, solve_dirichlet, weak_residual,
)


@pytest.fixture(scope="module")
def h1_grid():
    return discretize(preset("H1"), Box([0.0] * 3, [1.0] * 3), 9)


@pytest.fixture(scope="module")
def r1_grid():
    return discretize(preset("R1"), Box([0.0], [1.0]), 5)


def test_r1_stencil(r1_grid):
    assert r1_grid.h[0] == pytest.approx(0.25)
    D = r1_grid.D[0].toarray()
    assert np.allclose(D[2, 1:4], [-2.0, 0.0, 2.0])


def test_too_coarse():
    with pytest.raises(TooCoarse):
        discretize(preset("R1"), Box([0.0], [1.0]), 3)


def test_coefficient_table(h1_grid):
    node = np.flatnonzero(np.all(np.isclose(h1_grid.points, 0.5), axis=0))[0]
    assert np.allclose(h1_grid.coefficients[0, :, node], [1.0, 0.0, -0.25], atol=1e-14)
    assert np.allclose(h1_grid.coefficients[1, :, node], [0.0, 1.0, 0.25], atol=1e-14)


def test_affine_exactness(h1_grid):
    a = np.array([0.3, -1.2, 0.7])
    u = 0.5 + a @ h1_grid.points
    G = np.array([op @ u for op in h1_grid.X])
    x1, x2 = h1_grid.points[0], h1_grid.points[1]
    exact = np.array([a[0] - x2 / 2 * a[2], a[1] + x1 / 2 * a[2]])
    idx = h1_grid.interior
    assert np.max(np.abs(G[:, idx] - exact[:, idx])) < 1e-13


def test_energy_at_zero(h1_grid):
    eps, p = 1e-2, 2.5
    E, _ = discrete_energy(h1_grid, np.zeros(h1_grid.interior.size), p, None, eps)
    assert E == pytest.approx(np.sum(h1_grid.weights) * eps**p / p, rel=1e-12)


def test_energy_gradient_matches_finite_differences(h1_grid):
    rng = np.random.default_rng(0)
    u = rng.uniform(-1, 1, h1_grid.interior.size)
    reaction = Reaction("1 + rho^2/4", 2.5)
    _, grad = discrete_energy(h1_grid, u, 2.5, reaction)
    worst = 0.0
    for _ in range(20):
        d = rng.standard_normal(u.size)
        t = 1e-5
        fd = (discrete_energy(h1_grid, u + t * d, 2.5, reaction)[0]
              - discrete_energy(h1_grid, u - t * d, 2.5, reaction)[0]) / (2 * t)
        exact = grad @ d
        worst = max(worst, abs(fd - exact) / abs(exact))
    assert worst < 1e-6


def test_p2_gradient_is_linear(h1_grid):
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-1, 1, (2, h1_grid.interior.size))
    g = lambda u: discrete_energy(h1_grid, u, 2, None, 1e-8)[1]
    assert np.allclose(g(2 * a - 3 * b), 2 * g(a) - 3 * g(b), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([2.0, 3.0]), st.floats(0.1, 10.0), st.integers(0, 1000))
def test_operator_is_p_homogeneous(p, lam, seed):
    grid = discretize(preset("H1"), Box([0.0] * 3, [1.0] * 3), 5)
    u = np.random.default_rng(seed).uniform(-1, 1, grid.interior.size)
    lhs = discrete_operator(grid, lam * u, p)
    rhs = lam ** (p - 1) * discrete_operator(grid, u, p)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.max(np.abs(rhs)))


def test_weak_residual_examples(h1_grid):
    zero = np.zeros(h1_grid.interior.size)
    r = weak_residual(h1_grid, zero, 2, Reaction("1", 2))
    assert r == pytest.approx(np.max(h1_grid.weights[h1_grid.interior]))
    u = direct_solve_p2(h1_grid, 1.0)
    assert weak_residual(h1_grid, u, 2, Reaction("1", 2)) < 1e-10


def test_solver_recovers_classical_solution():
    errs = []
    for n in (9, 17, 33):
        grid = discretize(preset("R1"), Box([0.0], [1.0]), n)
        sol = solve_dirichlet(grid, 2, Reaction("1", 2))
        x = grid.points[0]
        errs.append(np.max(np.abs(sol.values - x * (1 - x) / 2)))
        assert np.all(np.diff(sol.trace) <= 0)
        assert sol.grad_norm <= SolveOptions().tol
        assert sol.weak_residual <= 10 * SolveOptions().tol
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.min(orders) >= 1.8


def test_zero_reaction_gives_zero(h1_grid):
    sol = solve_dirichlet(h1_grid, 2, None, init="random", seed=3)
    assert np.max(np.abs(sol.values)) < 1e-6
    sol = solve_dirichlet(h1_grid, 2, None)
    assert sol.iterations == 0 and not np.any(sol.values)


def test_heisenberg_solution_is_positive():
    grid = discretize(preset("H1"), Box([0.0] * 3, [1.0] * 3), 17)
    u = direct_solve_p2(grid, 1.0)
    assert np.min(u[grid.interior]) > 0
    assert np.all(u[grid.boundary] == 0)


@pytest.mark.parametrize("p,F", [(2.0, "1"), (2.5, "1 + rho^(1/2)"), (3.0, "1")])
def test_strong_positivity(h1_grid, p, F):
    sol = solve_dirichlet(h1_grid, p, Reaction(F, p), init="positive")
    assert sol.interior_min > 0


def test_seed_determinism(h1_grid):
    a = solve_dirichlet(h1_grid, 2.5, Reaction("1", 2.5), init="random", seed=11)
    b = solve_dirichlet(h1_grid, 2.5, Reaction("1", 2.5), init="random", seed=11)
    assert np.array_equal(a.values, b.values) and a.trace == b.trace


def test_eps_must_be_positive(h1_grid):
    with pytest.raises(NonPositiveEps):
        solve_dirichlet(h1_grid, 2.5, None, eps=0.0)


def test_nodal_load_matches_constant_reaction(h1_grid):
    load = NodalLoad(np.ones(h1_grid.interior.size))
    a = solve_dirichlet(h1_grid, 2, load).values
    b = solve_dirichlet(h1_grid, 2, Reaction("1", 2)).values
    assert np.allclose(a, b, atol=1e-8)


def test_reaction_flags(h1_grid):
    require_reaction_flags(Reaction("1 + rho^(1/2)", 2.5), h1_grid)
    with pytest.raises(ReactionAssumptionError):
        require_reaction_flags(Reaction("rho", 2), h1_grid)
    with pytest.raises(ReactionAssumptionError):
        require_reaction_flags(Reaction("-1", 2), h1_grid)


def test_discrete_gradient_shape(h1_grid):
    G = horizontal_gradient_h(h1_grid, np.zeros(h1_grid.interior.size))
    assert G.shape == (2, h1_grid.size)
