import numpy as np
import pytest

from stratified.errors import ReactionAssumptionError
from stratified.experiments import (
    check_potential, comparison_experiment, fixed_point_solve, trivial_solution_experiment, uniqueness_experiment,
)
from stratified.geometry import Box
from stratified.groups import preset
from stratified.solver import Reaction, SolveOptions, discretize


@pytest.fixture(scope="module")
def h1_grid():
    return discretize(preset("H1"), Box([0.0] * 3, [1.0] * 3), 9)


@pytest.fixture(scope="module")
def r2_grid():
    return discretize(preset("R2"), Box([0.0] * 2, [1.0] * 2), 17)


def test_trivial_plain(h1_grid):
    rep = trivial_solution_experiment(h1_grid, 2, "plain")
    assert rep.passed and rep.value < 1e-6
    assert len(rep.details["norms"]) == 5


def test_trivial_schrodinger(h1_grid):
    rep = trivial_solution_experiment(h1_grid, 2, "schrodinger", "1")
    assert rep.passed and rep.value < 1e-6


def test_trivial_from_zero_takes_no_iterations(h1_grid):
    rep = trivial_solution_experiment(h1_grid, 2, "plain", opts=SolveOptions(init=np.zeros(h1_grid.interior.size)),
                                      n_starts=1)
    assert rep.value == 0.0 and rep.details["iterations"] == [0]


def test_negative_potential_is_refused(h1_grid):
    with pytest.raises(ReactionAssumptionError):
        check_potential(ex_parse("x1 - 1/2"), h1_grid)


def ex_parse(text):
    from stratified.expressions import parse_expression
    return parse_expression(text)


def test_comparison_euclidean(r2_grid):
    rep = comparison_experiment(r2_grid, 2, 0.5, "1", 0.5)
    assert rep.passed and rep.value < 1e-6
    assert rep.details["min_u_minus_v"] > 0
    assert rep.details["trace_monotone"]


def test_comparison_heisenberg_p25(h1_grid):
    assert comparison_experiment(h1_grid, 2.5, 1.0).passed


def test_comparison_guards(r2_grid):
    with pytest.raises(ValueError):
        comparison_experiment(r2_grid, 2, 0.5, "0")
    with pytest.raises(ValueError):
        comparison_experiment(r2_grid, 2, 1.5)
    with pytest.raises(ValueError):
        comparison_experiment(r2_grid, 2, 0.5, delta=0.0)


def test_fixed_point_is_a_solution(r2_grid):
    sol, hist = fixed_point_solve(r2_grid, 2, ex_parse("1"), 0.5)
    assert hist[-1] < 1e-6
    assert sol.interior_min > 0


@pytest.mark.parametrize("F,p", [("1", 2.0), ("rho^(1/2)", 2.0)])
def test_uniqueness(h1_grid, F, p):
    rep = uniqueness_experiment(h1_grid, p, Reaction(F, p))
    assert rep.passed
    assert rep.details["positive_runs"] >= 2


def test_uniqueness_refuses_linear_growth(h1_grid):
    with pytest.raises(ReactionAssumptionError):
        uniqueness_experiment(h1_grid, 2.0, Reaction("rho", 2.0))
    with pytest.raises(ReactionAssumptionError):
        uniqueness_experiment(h1_grid, 5.0, Reaction("1", 5.0))
