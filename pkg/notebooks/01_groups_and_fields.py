# coding: utf-8

# # Stratified groups and horizontal calculus
#
# A stratified group is R^N with a polynomial group law, a family of
# dilations and a set of generators X_1..X_{N1} whose brackets span the
# whole tangent space.  This script walks through the presets.

# %%
import numpy as np

from stratified import expressions as ex
from stratified.fields import horizontal_gradient, infinity_sub_laplacian, p_sub_laplacian
from stratified.groups import PRESETS, dilate, group_multiply, hoermander_rank, lie_bracket, preset

# %% [markdown]
# ## The presets

# %%
for name in PRESETS:
    g = preset(name)
    print(f"{name:6s} strata={g.strata} N={g.N} Q={g.Q} rank at 0 = {hoermander_rank(g, np.zeros(g.N))}")

# %% [markdown]
# ## The Heisenberg group
#
# X_1 = d/dx1 - (x2/2) d/dx3 and X_2 = d/dx2 + (x1/2) d/dx3.  Their bracket
# is the vertical direction d/dx3.

# %%
h1 = preset("H1")
X1, X2 = h1.generators
print("X1 =", X1)
print("X2 =", X2)
print("[X1, X2] =", lie_bracket(X1, X2))

# %%
print("(1,0,0) o (0,1,0) =", group_multiply(h1, [1, 0, 0], [0, 1, 0]))
print("delta_2 (1,1,1)   =", dilate(h1, 2, [1, 1, 1]))

# %% [markdown]
# ## Horizontal derivatives
#
# The sub-Laplacian only sees horizontal directions, so u = x3 is
# 2-harmonic even though it grows vertically.

# %%
u = ex.parse_expression("x3")
x = np.array([0.0, 2.0, 0.0])
print("grad_G x3 at (0,2,0):", horizontal_gradient(h1, u, x))
print("L_2 x3:", p_sub_laplacian(h1, u, 2, x))
print("L_3 (x1 + x1*x3):", p_sub_laplacian(h1, "x1 + x1*x3", 3, np.array([0.5, 0.2, -0.3])))

# %% [markdown]
# The regularised operator converges as eps -> 0 when the gradient is nonzero.

# %%
for eps in (1e-2, 1e-4, 1e-6, 1e-8):
    print(f"eps={eps:.0e}  L_3 u = {p_sub_laplacian(h1, 'x1 + x1*x3', 3, np.array([0.5, 0.2, -0.3]), eps):.12f}")

# %% [markdown]
# The Euclidean norm is infinity-harmonic away from the origin.

# %%
print(infinity_sub_laplacian(preset("R2"), "(x1^2 + x2^2)^(1/2)", np.array([0.6, 0.8])))
