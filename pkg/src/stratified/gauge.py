"""Polarizable gauges, fundamental solutions of L_p and flux normalisation.

For the presets the gauge has the form

    Euclidean:  d = |x|
    H^n:        d = ((sum_i x_i^2)^2 + beta * t^2)^(1/4)

and ``beta`` is fitted so that the infinity-sub-Laplacian of ``d`` vanishes
off the pole.  The fundamental solution is then

    eps_p = c_p d^((p-Q)/(p-1))   (p != Q),     eps_Q = -c_Q log d,

with ``c_p`` chosen so that the weighted horizontal flux of ``eps_p``
through any boundary enclosing the pole equals +1.  That choice makes
``c_p`` negative for ``p <= Q``.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import least_squares

from . import expressions as ex
from .errors import CalibrationFailed, DegenerateFlux, PoleEvaluation
from .fields import Horizontal, infinity_sub_laplacian
from .geometry import Box, GaugeBall, QuadratureRule, boundary_data, fsum

CALIBRATION_SEED = 7
POLARIZATION_TOL = 1e-8
FLUX_CHECK_RTOL = 1e-3


@dataclass
class PolarizableGauge:
    """A calibrated gauge ``d`` with the constants of its fundamental solutions."""

    group: object
    d: ex.Expr
    beta: float = None
    residual: float = 0.0
    c: dict = field(default_factory=dict)

    @property
    def Q(self):
        return self.group.Q

    def exponent(self, p):
        """Homogeneity degree ``(p-Q)/(p-1)`` of ``eps_p`` (``None`` on the log branch)."""
        if p <= 1:
            raise ValueError("p must exceed 1")
        if p == self.Q:
            return None
        return (p - self.Q) / (p - 1)

    def translated_gauge(self, pole=None):
        """``d(pole^{-1} o y)`` as an expression in ``y``."""
        if pole is None or not np.any(pole):
            return self.d
        law = self.group.law
        y = self.group.coordinates
        inv = law.inverse([ex.Num(ex.to_fraction(v)) for v in pole])
        z = law.multiply(inv, y)
        return ex.substitute(self.d, {f"x{j + 1}": ex.as_expr(zj) for j, zj in enumerate(z)})

    def raw_expr(self, p, pole=None):
        """``eps_p`` with ``c_p = 1``, as an expression in ``y``."""
        d = self.translated_gauge(pole)
        a = self.exponent(p)
        if a is None:
            return ex.neg(ex.func("log", d))
        P = ex.to_fraction(p)
        return ex.power(d, ex.Num((P - self.Q) / (P - 1)))

    def expr(self, p, pole=None, rule=None):
        """Normalised ``eps_p(pole^{-1} o y)``; calibrates ``c_p`` on first use."""
        c = self.c.get(p)
        if c is None:
            c = calibrate_c_p(self, p, rule)
        return ex.mul(ex.Num(ex.to_fraction(c)), self.raw_expr(p, pole))

    def evaluate(self, x):
        return ex.evaluate_at(self.d, np.asarray(x, dtype=float))


def _kind(g):
    name = (g.spec.preset or "").split(":")[0]
    if name in ("euclidean", "heisenberg"):
        return name
    if g.step == 1:
        return "euclidean"
    return None


def _heisenberg_gauge(g, beta):
    n2 = g.N1
    s = ex.ZERO
    for i in range(n2):
        s = ex.add(s, ex.power(ex.coordinate(i), ex.Num(2)))
    t = ex.coordinate(g.N - 1)
    inner = ex.add(ex.power(s, ex.Num(2)), ex.mul(beta, ex.power(t, ex.Num(2))))
    return ex.power(inner, ex.Num(Fraction(1, 4)))


def sample_sphere(N, n, seed):
    """``n`` seeded points on the Euclidean unit sphere in R^N, shape (N, n)."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((N, n))
    return z / np.linalg.norm(z, axis=0)


def polarization_residual(pg, points):
    """``|L_inf d|`` at the given points."""
    return np.abs(infinity_sub_laplacian(pg.group, Horizontal(pg.group, pg.d), points))


def gauge_calibrate(g, n_fit=60, n_check=100, seed=CALIBRATION_SEED):
    """Fit the gauge of a Euclidean or Heisenberg preset.

    The Heisenberg shape constant is found by least squares on the values
    of ``L_inf d`` at ``n_fit`` seeded sphere points, then checked on
    ``n_check`` fresh points.

    Raises
    ------
    CalibrationFailed
        The group is not a supported preset or the residual floor of 1e-8
        is not reached.
    """
    kind = _kind(g)
    if kind == "euclidean":
        s = ex.ZERO
        for i in range(g.N):
            s = ex.add(s, ex.power(ex.coordinate(i), ex.Num(2)))
        pg = PolarizableGauge(g, ex.power(s, ex.Num(Fraction(1, 2))))
    elif kind == "heisenberg":
        beta = ex.Var("beta")
        h = Horizontal(g, _heisenberg_gauge(g, beta))
        fit_pts = sample_sphere(g.N, n_fit, seed)

        def resid(logb):
            grad = np.array([ex.evaluate_at(e, fit_pts, beta=np.exp(logb[0])) for e in h.first])
            hess = np.array([[ex.evaluate_at(e, fit_pts, beta=np.exp(logb[0])) for e in row] for row in h.second])
            return np.einsum("km,kjm,jm->m", grad, hess, grad)

        sol = least_squares(resid, x0=[0.0], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        beta_val = float(np.exp(sol.x[0]))
        d = _heisenberg_gauge(g, ex.Num(ex.to_fraction(beta_val)))
        pg = PolarizableGauge(g, d, beta=beta_val)
    else:
        raise CalibrationFailed(f"no gauge family for group {g.name}; supported: Euclidean, H^n")
    check = sample_sphere(g.N, n_check, seed + 1) * np.linspace(0.5, 2.0, n_check)
    pg.residual = float(np.max(polarization_residual(pg, check)))
    if not pg.residual < POLARIZATION_TOL:
        raise CalibrationFailed(f"max |L_inf d| = {pg.residual:.3e} does not reach {POLARIZATION_TOL}")
    return pg


def fundamental_solution(pg, p, x, rule=None):
    """``eps_p(x)`` with the pole at the identity.

    Raises
    ------
    PoleEvaluation
        ``x`` is the pole.
    """
    x = np.asarray(x, dtype=float)
    dval = np.asarray(pg.evaluate(x))
    if np.any(dval == 0):
        raise PoleEvaluation("fundamental solution evaluated at its pole")
    c = pg.c.get(p)
    if c is None:
        c = calibrate_c_p(pg, p, rule)
    a = pg.exponent(p)
    out = -c * np.log(dval) if a is None else c * dval**a
    return out[()] if isinstance(out, np.ndarray) else out


def weighted_flux(g, dom, u, p, rule):
    """``int_boundary |grad_G u|^(p-2) <grad~ u, dnu>`` for a symbolic ``u``."""
    from .fields import _weight_power

    data = boundary_data(g, dom, rule)
    grad = Horizontal(g, u).gradient(data.points)
    grad = np.broadcast_to(grad, (g.N1, data.points.shape[1]))
    w = _weight_power(np.sum(grad**2, axis=0), p, 0.0)
    return fsum(data.weights * w * np.sum(grad * data.pullbacks, axis=0))


def reference_domains(pg):
    """A unit gauge ball and a box ``[-1, 1]^N``, both containing the identity."""
    g = pg.group
    ball = GaugeBall(g, pg.d, np.zeros(g.N), 1.0, subdiv=6 if g.N <= 3 else 2)
    box = Box(-np.ones(g.N), np.ones(g.N), subdiv=2)
    return ball, box


def calibrate_c_p(pg, p, rule=None, check=True):
    """``c_p`` making the flux of ``eps_p`` through the unit gauge ball equal to 1.

    Flux scales like ``sign(c)|c|^(p-1)``, so ``c_p = sign(F) |F|^(-1/(p-1))``
    with ``F`` the flux for ``c_p = 1``.  With ``check`` the normalised flux
    through ``[-1, 1]^N`` must also be 1 within 1e-3 relative.

    Raises
    ------
    DegenerateFlux
        ``|F| < 1e-12``.
    CalibrationFailed
        The box flux disagrees.
    """
    rule = rule or QuadratureRule(14 if pg.group.N <= 3 else 8)
    ball, box = reference_domains(pg)
    raw = pg.raw_expr(p)
    F = weighted_flux(pg.group, ball, raw, p, rule)
    if abs(F) < 1e-12:
        raise DegenerateFlux(f"raw flux {F:.3e} is too small to normalise")
    c = float(np.sign(F) * abs(F) ** (-1.0 / (p - 1)))
    if check:
        F_box = weighted_flux(pg.group, box, ex.mul(ex.Num(ex.to_fraction(c)), raw), p, rule)
        if not abs(F_box - 1.0) <= FLUX_CHECK_RTOL:
            raise CalibrationFailed(f"flux through the box is {F_box:.6g}, expected 1")
    pg.c[p] = c
    return c
