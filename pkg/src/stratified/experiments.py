"""Numerical experiments for the Dirichlet problem ``-L_p u = F(x, u)``.

Each experiment returns an :class:`ExperimentReport` whose ``passed`` flag
is the predicted outcome of the corresponding uniqueness, comparison or
trivial-solution statement on the given grid.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import expressions as ex
from .errors import FixedPointDivergence, ReactionAssumptionError
from .solver import NodalLoad, Reaction, SolveOptions, require_reaction_flags, solve_dirichlet

N_STARTS = 5
TRIVIAL_TOL = 1e-5
COMPARISON_TOL = 1e-6
UNIQUENESS_TOL = 1e-5
# The homogeneous energy is degenerate at u = 0 for p > 2 (|u| ~ |grad E|^(1/(p-1))),
# so these solves stop on a tighter gradient norm.
TRIVIAL_SOLVE_TOL = 1e-12
FIXED_POINT_TOL = 1e-6
FIXED_POINT_MAX_ITER = 200


@dataclass
class ExperimentReport:
    """Outcome of one experiment: the measured ``value`` against ``tolerance``."""

    experiment: str
    value: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)


def _opts(opts, **kw):
    base = opts or SolveOptions()
    return SolveOptions(**{**base.__dict__, **kw})


def _expr(e):
    return ex.parse_expression(e) if isinstance(e, str) else ex.as_expr(e)


def _node_values(expr, X, rho=None):
    env = ex.coordinate_env(X)
    if rho is not None:
        env["rho"] = rho
    return np.broadcast_to(ex.evaluate(expr, env), X.shape[1:] if rho is None else np.shape(rho)).astype(float)


def check_potential(q, grid, rho_range=(-10.0, 10.0), n_rho=41):
    """Sampled check that ``q(x, rho) >= 0`` is finite on the grid nodes.

    Raises
    ------
    ReactionAssumptionError
        A sampled value is negative or not finite.
    """
    X = grid.points
    for r in np.linspace(*rho_range, n_rho):
        vals = _node_values(q, X, np.full(X.shape[1], r))
        if not np.all(np.isfinite(vals)):
            raise ReactionAssumptionError(f"potential {ex.to_string(q)} is unbounded on the grid")
        if np.any(vals < 0):
            raise ReactionAssumptionError(f"potential {ex.to_string(q)} takes negative values")


def trivial_solution_experiment(grid, p, variant="plain", q="1", opts=None, n_starts=N_STARTS, seed=0):
    """Solve the homogeneous problem from seeded random starts.

    ``variant="plain"`` solves ``-L_p u = 0``; ``variant="schrodinger"``
    solves ``-L_p u + q(x, u) u = 0`` with ``q >= 0`` bounded.  Passes iff
    every run returns ``max |u| < 1e-5``.
    """
    if variant == "plain":
        reaction = None
    elif variant == "schrodinger":
        qe = _expr(q)
        check_potential(qe, grid)
        reaction = Reaction(ex.neg(ex.mul(qe, ex.Var("rho"))), p, clamp=False)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    norms, iters = [], []
    init = (opts.init if opts is not None and not isinstance(opts.init, str) else "random")
    tol = opts.tol if opts is not None else TRIVIAL_SOLVE_TOL
    for k in range(n_starts):
        sol = solve_dirichlet(grid, p, reaction, _opts(opts, init=init, seed=seed + k, tol=tol))
        norms.append(float(np.max(np.abs(sol.values))))
        iters.append(sol.iterations)
    value = max(norms)
    return ExperimentReport(
        "trivial" if variant == "plain" else "schrodinger",
        value, TRIVIAL_TOL, value < TRIVIAL_TOL,
        {"norms": norms, "iterations": iters, "p": p, "variant": variant},
    )


def fixed_point_solve(grid, p, coeff, q_exp, delta=0.0, opts=None, v0=None,
                      tol=FIXED_POINT_TOL, max_iter=FIXED_POINT_MAX_ITER):
    """Solve ``-L_p v = coeff(x) v_+^q + delta`` by iterating on the frozen right-hand side.

    Raises
    ------
    FixedPointDivergence
        The update grows for five consecutive sweeps or ``max_iter`` is hit.
    """
    Xi = grid.points[:, grid.interior]
    c = _node_values(coeff, Xi)
    v = np.ones(grid.interior.size) if v0 is None else np.asarray(v0, dtype=float)
    u_init = "zero"
    history, growth = [], 0
    for it in range(max_iter):
        load = NodalLoad(c * np.maximum(v, 0.0) ** q_exp + delta)
        sol = solve_dirichlet(grid, p, load, _opts(opts, init=u_init))
        v_new = sol.values[grid.interior]
        step = float(np.max(np.abs(v_new - v)))
        history.append(step)
        v, u_init = v_new, v_new
        if step < tol:
            return sol, history
        growth = growth + 1 if len(history) > 1 and step > history[-2] else 0
        if growth >= 5:
            break
    raise FixedPointDivergence(f"fixed-point updates {history[-3:]} after {len(history)} sweeps")


def comparison_experiment(grid, p, q_exp, F_coeff="1", delta=0.5, opts=None):
    """Compare the solution ``v`` of ``-L_p v = F v^q`` with the strict supersolution ``u``.

    ``u`` solves ``-L_p u = F u^q + delta``.  Passes iff ``max (v - u)_+ <= 1e-6``.
    """
    if not 0 < q_exp < p - 1:
        raise ValueError(f"need 0 < q < p - 1, got q={q_exp}, p={p}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    coeff = _expr(F_coeff)
    c = _node_values(coeff, grid.points)
    if np.any(c < 0) or not np.any(c > 0):
        raise ValueError("F_coeff must be nonnegative and not identically zero on the grid")
    v_sol, v_hist = fixed_point_solve(grid, p, coeff, q_exp, 0.0, opts)
    u_sol, u_hist = fixed_point_solve(grid, p, coeff, q_exp, delta, opts)
    gap = float(np.max(np.maximum(v_sol.values - u_sol.values, 0.0)))
    return ExperimentReport(
        "comparison", gap, COMPARISON_TOL, gap <= COMPARISON_TOL,
        {"p": p, "q": q_exp, "delta": delta, "sweeps_v": len(v_hist), "sweeps_u": len(u_hist),
         "min_u_minus_v": float(np.min((u_sol.values - v_sol.values)[grid.interior])),
         "trace_monotone": bool(np.all(np.diff(v_sol.trace) <= 0) and np.all(np.diff(u_sol.trace) <= 0))},
    )


def uniqueness_experiment(grid, p, reaction, n_starts=N_STARTS, seed=0, opts=None):
    """Solve from seeded positive starts and measure the spread of positive solutions.

    Refuses reactions failing the positivity/growth or strict-decrease
    checks.  Runs ending at a solution with a nonpositive interior node are
    discarded.  Passes iff all pairwise max-norm distances are ``<= 1e-5``.

    Raises
    ------
    ReactionAssumptionError
        The reaction fails a structural check or ``p`` exceeds ``Q``.
    """
    if not isinstance(reaction, Reaction):
        reaction = Reaction(reaction, p)
    if not 1 < p <= grid.group.Q:
        raise ReactionAssumptionError(f"need 1 < p <= Q = {grid.group.Q}, got {p}")
    require_reaction_flags(reaction, grid)
    sols, discarded = [], 0
    for k in range(n_starts):
        sol = solve_dirichlet(grid, p, reaction, _opts(opts, init="positive", seed=seed + k))
        if sol.values[grid.interior].min() > 0:
            sols.append(sol.values)
        else:
            discarded += 1
    dists = [float(np.max(np.abs(a - b))) for a, b in combinations(sols, 2)]
    value = max(dists, default=0.0)
    return ExperimentReport(
        "uniqueness", value, UNIQUENESS_TOL, len(sols) >= 2 and value <= UNIQUENESS_TOL,
        {"p": p, "reaction": repr(reaction), "positive_runs": len(sols), "discarded": discarded,
         "distances": dists},
    )
