# coding: utf-8

# # The discrete Dirichlet problem
#
# -L_p u = F(x, u) with zero boundary values is solved by minimising the
# discrete energy with preconditioned nonlinear conjugate gradients.

# %%
import numpy as np

from stratified.experiments import comparison_experiment, trivial_solution_experiment, uniqueness_experiment
from stratified.geometry import Box
from stratified.groups import preset
from stratified.solver import Reaction, discretize, solve_dirichlet

# %% [markdown]
# ## Mesh convergence on [0, 1]
#
# The exact solution of -u'' = 1 is x(1-x)/2.

# %%
errs = []
for n in (9, 17, 33, 65):
    grid = discretize(preset("R1"), Box([0.0], [1.0]), n)
    sol = solve_dirichlet(grid, 2, Reaction("1", 2))
    x = grid.points[0]
    errs.append(np.max(np.abs(sol.values - x * (1 - x) / 2)))
print("errors", errs)
print("orders", np.log2(np.array(errs[:-1]) / np.array(errs[1:])))

# %% [markdown]
# ## A nonlinear problem on H^1

# %%
grid = discretize(preset("H1"), Box([0.0] * 3, [1.0] * 3), 9)
sol = solve_dirichlet(grid, 2.5, Reaction("1 + rho^(1/2)", 2.5), init="positive")
print(f"iterations={sol.iterations} energy={sol.energy:.8f} grad norm={sol.grad_norm:.1e} "
      f"min interior={sol.interior_min:.4f} max={sol.values.max():.4f}")
print("energy trace nonincreasing:", bool(np.all(np.diff(sol.trace) <= 0)))

# %% [markdown]
# ## Experiments
#
# Homogeneous problems only have the trivial solution, a strict
# supersolution lies above the solution, and sublinear reactions have
# a single positive solution.

# %%
for rep in (trivial_solution_experiment(grid, 2.5, "plain"),
            trivial_solution_experiment(grid, 2, "schrodinger", "1 + rho^2"),
            comparison_experiment(grid, 2.5, 1.0),
            uniqueness_experiment(grid, 2.0, Reaction("rho^(1/2)", 2.0))):
    print(f"{rep.experiment:12s} value={rep.value:.2e} tol={rep.tolerance:.0e} passed={rep.passed}")
