# coding: utf-8

# # Gauges and fundamental solutions
#
# On H^1 the gauge d = ((x1^2 + x2^2)^2 + beta x3^2)^(1/4) is
# infinity-harmonic for one value of beta, which we fit numerically.  The
# constant c_p of eps_p = c_p d^((p-Q)/(p-1)) is then fixed by requiring
# unit outward flux.

# %%
import numpy as np

from stratified.gauge import calibrate_c_p, gauge_calibrate, reference_domains, weighted_flux
from stratified.geometry import Box, QuadratureRule
from stratified.groups import preset
from stratified.identities import horizontal_flux

# %%
pg = gauge_calibrate(preset("H1"))
print(f"beta = {pg.beta:.12f}, max |L_inf d| = {pg.residual:.2e}")

# %% [markdown]
# The outward flux is +1 only with a negative constant for p < Q.

# %%
for p in (1.5, 2, 3, 4):
    print(f"p={p}: c_p = {calibrate_c_p(pg, p):+.10f}  exponent = {pg.exponent(p)}")
print("1/(2 pi) =", 1 / (2 * np.pi))

# %% [markdown]
# ## Domain independence
#
# The flux through an off-centre box equals the flux through the unit ball.

# %%
rule = QuadratureRule(14)
ball, _ = reference_domains(pg)
off = Box([-1.0, -0.5, -0.75], [0.5, 1.0, 1.25], 8)
for p in (2, 3):
    e = pg.expr(p)
    print(p, weighted_flux(pg.group, ball, e, p, rule), weighted_flux(pg.group, off, e, p, rule))

# %% [markdown]
# ## Mean-value property
#
# With the pole outside the box, eps_2 is 2-harmonic inside, so its flux vanishes.

# %%
box = Box([-1.0] * 3, [1.0] * 3, 4)
for pole in ([2.0, 0.0, 0.0], [0.0, 0.0, 2.0]):
    print(pole, horizontal_flux(pg.group, box, pg.expr(2, pole=np.array(pole)), 2, QuadratureRule(12)))
