# coding: utf-8

# # Divergence formula and Green identities
#
# Integrals of X_k f over a domain equal boundary integrals of f against
# the pulled-back form <X_k, d nu>.  Both sides use tensor Gauss-Legendre
# rules, so polynomial data is integrated exactly.

# %%
import numpy as np

from stratified import corpus as C
from stratified.geometry import Box, QuadratureRule, boundary_form_integral, divergence_residual
from stratified.groups import preset
from stratified.identities import green_first_residual, green_second_residual

# %%
h1 = preset("H1")
box = Box([0.0] * 3, [1.0] * 3)
print("int_bdry x3 <X_1, dnu> =", boundary_form_integral(h1, box, 0, "x3", QuadratureRule(4)), "(expected -1/4)")

# %% [markdown]
# ## The seeded corpus
#
# 25 random polynomial field lists over R^3, H^1 and the Engel group.

# %%
worst = {}
for case in C.divergence_corpus():
    r = divergence_residual(preset(case.group), case.box(), case.exprs["fields"],
                            QuadratureRule(case.exprs["degree"] + 1))
    worst[case.group] = max(worst.get(case.group, 0.0), r)
print(worst)

# %% [markdown]
# ## Green's first identity for p != 2
#
# Non-polynomial integrands converge as the quadrature order increases.

# %%
for order in (4, 6, 8, 10):
    rep = green_first_residual(h1, box, "x1 + 2*x2 + x3", "x1*x2", 3, QuadratureRule(order))
    print(f"order {order:2d}: lhs={rep.lhs:.12f} rhs={rep.rhs:.12f} residual={rep.residual:.2e}")

# %%
rep = green_second_residual(h1, box, "x1^2", "x2^2", 2, QuadratureRule(6))
print("Green II residual", rep.residual, "antisymmetry", rep.extra["antisymmetry"])
