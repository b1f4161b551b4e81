"""Numerical evaluation of the Green, Picone, Hardy-type and Diaz-Saa identities.

Every routine computes both sides of an identity or the value of an
inequality gap by quadrature of symbolic integrands.  Horizontal
derivatives come from :mod:`stratified.fields`; boundary terms use the
pullbacks of :mod:`stratified.geometry`.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import expressions as ex
from .errors import (
    DomainError,
    InadmissibleNonlinearity,
    NegativeRobinMeasure,
    NonpositiveInput,
    NonpositiveV,
    PoleTooCloseToBoundary,
    SingularGradient,
    VNotBoundedBelow,
)
from .fields import Horizontal, _weight_power, as_field, p_laplacian_from_derivatives
from .gauge import weighted_flux
from .geometry import Box, boundary_data, bump, fsum, sample_points


@dataclass
class IdentityReport:
    """Both sides of one identity with pointwise statistics.

    ``minimum``/``maximum`` describe the pointwise quantity the identity
    is about (volume integrand, or ``R`` for Picone scans).
    """

    identity: str
    lhs: float
    rhs: float
    minimum: float = math.nan
    maximum: float = math.nan
    samples: int = 0
    order: int = None
    tolerance: float = None
    extra: dict = field(default_factory=dict)
    verdict: bool = None

    @property
    def residual(self):
        return abs(self.lhs - self.rhs)

    @property
    def passed(self):
        if self.verdict is not None:
            return self.verdict
        if self.tolerance is None:
            return None
        return self.residual <= self.tolerance


def _derivs(h, X, second=True):
    M = X.shape[1]
    grad = np.broadcast_to(h.gradient(X), (len(h.first), M))
    if not second:
        return grad, None
    hess = np.broadcast_to(h.hessian(X), (len(h.first), len(h.first), M))
    return grad, hess


def _vals(h, X):
    return np.broadcast_to(h.value(X), (X.shape[1],))


def _check_pair(g, u, v):
    return Horizontal(g, u), Horizontal(g, v)


# ---------------------------------------------------------------------------
# Green identities

def green_first_residual(g, dom, u, v, p, rule, tolerance=None):
    """Both sides of Green's first identity for the p-sub-Laplacian.

    ``int (|grad u|^(p-2) grad u . grad v + v L_p u) = int_boundary v |grad u|^(p-2) <grad~ u, dnu>``

    Raises
    ------
    SingularGradient
        ``p < 2`` and the horizontal gradient of ``u`` vanishes at a node.
    """
    hu, hv = _check_pair(g, u, v)
    X, W = dom.volume_nodes(rule)
    gu, Hu = _derivs(hu, X)
    gv, _ = _derivs(hv, X, second=False)
    w = _weight_power(np.sum(gu**2, axis=0), p, 0.0)
    Lu = p_laplacian_from_derivatives(gu, Hu, p)
    integrand = w * np.sum(gu * gv, axis=0) + _vals(hv, X) * Lu
    lhs = fsum(W * integrand)

    data = boundary_data(g, dom, rule)
    gub, _ = _derivs(hu, data.points, second=False)
    wb = _weight_power(np.sum(gub**2, axis=0), p, 0.0)
    rhs = fsum(data.weights * _vals(hv, data.points) * wb * np.sum(gub * data.pullbacks, axis=0))
    return IdentityReport("green1", lhs, rhs, float(integrand.min()), float(integrand.max()),
                          X.shape[1], rule.order, tolerance)


def green_first_fields(g, u, v, p):
    """The fields ``f_k = v |grad u|^(p-2) X_k u`` whose divergence is the Green I integrand."""
    from .fields import power_of_gradient_expr

    hu = Horizontal(g, u)
    v = as_field(v, g)
    w = power_of_gradient_expr(g, hu, p)
    return [ex.mul(ex.mul(v, w), Xk) for Xk in hu.first]


def _green_second_parts(g, dom, u, v, p, rule):
    hu, hv = _check_pair(g, u, v)
    X, W = dom.volume_nodes(rule)
    gu, Hu = _derivs(hu, X)
    gv, Hv = _derivs(hv, X)
    uu, vv = _vals(hu, X), _vals(hv, X)
    wu = _weight_power(np.sum(gu**2, axis=0), p, 0.0)
    wv = _weight_power(np.sum(gv**2, axis=0), p, 0.0)
    Lu = p_laplacian_from_derivatives(gu, Hu, p)
    Lv = p_laplacian_from_derivatives(gv, Hv, p)
    dot = np.sum(gu * gv, axis=0)
    integrand = uu * Lv - vv * Lu + (wv - wu) * dot
    swapped = vv * Lu - uu * Lv + (wu - wv) * dot

    data = boundary_data(g, dom, rule)
    gub, _ = _derivs(hu, data.points, second=False)
    gvb, _ = _derivs(hv, data.points, second=False)
    wub = _weight_power(np.sum(gub**2, axis=0), p, 0.0)
    wvb = _weight_power(np.sum(gvb**2, axis=0), p, 0.0)
    flux_v = np.sum(gvb * data.pullbacks, axis=0)
    flux_u = np.sum(gub * data.pullbacks, axis=0)
    density = wvb * _vals(hu, data.points) * flux_v - wub * _vals(hv, data.points) * flux_u
    return W, integrand, swapped, data.weights, density


def green_second_residual(g, dom, u, v, p, rule, tolerance=None):
    """Both sides of Green's second identity, plus the swap antisymmetry of the volume side.

    ``extra['antisymmetry']`` is ``|lhs(u, v) + lhs(v, u)|``; the verdict
    (when a tolerance is given) requires it to be below 1e-10 as well.
    """
    W, integrand, swapped, Wb, density = _green_second_parts(g, dom, u, v, p, rule)
    lhs = fsum(W * integrand)
    rhs = fsum(Wb * density)
    anti = abs(lhs + fsum(W * swapped))
    rep = IdentityReport("green2", lhs, rhs, float(integrand.min()), float(integrand.max()),
                         W.size, rule.order, tolerance, {"antisymmetry": anti})
    if tolerance is not None:
        rep.verdict = rep.residual <= tolerance and anti <= 1e-10
    return rep


def horizontal_flux(g, dom, u, p, rule):
    """``int_boundary |grad_G u|^(p-2) <grad~ u, dnu>``."""
    return weighted_flux(g, dom, as_field(u, g), p, rule)


# ---------------------------------------------------------------------------
# Picone

class AdmissibleNonlinearity:
    """A positive, locally Lipschitz ``f(t)`` on ``t > 0`` with ``(p-1) f^((p-2)/(p-1)) <= f'``.

    The inequality is checked on 2000 log-spaced points in ``[1e-6, 1e6]``
    with relative slack ``1e-12 * max(1, |lhs|, |rhs|)``.

    Raises
    ------
    InadmissibleNonlinearity
        On the first grid point that violates positivity, finiteness of
        ``f'`` or the inequality.
    """

    GRID = np.logspace(-6, 6, 2000)

    def __init__(self, f, p):
        if p <= 1:
            raise ValueError("p must exceed 1")
        self.p = p
        self.f = ex.parse_expression(f, n_coords=0) if isinstance(f, str) else ex.as_expr(f)
        self.df = ex.diff(self.f, "t")
        t = self.GRID
        try:
            fv, dfv = self.value(t), self.derivative(t)
        except ex.EvalError as err:
            raise InadmissibleNonlinearity(f"f cannot be evaluated on the grid: {err}") from None
        if not np.all(np.isfinite(dfv)):
            raise InadmissibleNonlinearity("f' is not finite on the grid")
        if np.any(fv <= 0):
            raise InadmissibleNonlinearity(f"f must be positive; f({t[np.argmax(fv <= 0)]:.3g}) <= 0")
        lhs = (p - 1) * np.abs(fv) ** ((p - 2) / (p - 1))
        bad = lhs > dfv + 1e-12 * np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(dfv)))
        if np.any(bad):
            i = int(np.argmax(bad))
            raise InadmissibleNonlinearity(
                f"(p-1)|f|^((p-2)/(p-1)) = {lhs[i]:.6g} exceeds f' = {dfv[i]:.6g} at t = {t[i]:.6g}")

    def __repr__(self):
        return f"AdmissibleNonlinearity({ex.to_string(self.f)!r}, p={self.p})"

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(ex.evaluate(self.f, {"t": t}), t.shape).astype(float)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(ex.evaluate(self.df, {"t": t}), t.shape).astype(float)

    def of(self, v):
        """Symbolic ``f(v)``."""
        return ex.substitute(self.f, {"t": v})


def canonical_nonlinearity(p):
    """``f(t) = t^(p-1)``, which meets the admissibility bound with equality."""
    return AdmissibleNonlinearity(ex.power(ex.Var("t"), ex.Num(ex.to_fraction(p) - 1)), p)


def _grad_power(grad, p):
    """``|grad|^(p-2) grad``: zero where the gradient vanishes and p >= 2, an error for p < 2."""
    sq = np.sum(grad**2, axis=0)
    if p == 2:
        return grad
    zero = sq == 0
    if np.any(zero) and p < 2:
        raise SingularGradient(f"|grad v| vanishes and p = {p} < 2")
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(zero, 0.0, sq ** ((p - 2) / 2))
    return w * grad


class PiconePair:
    """Prepared symbolic data for ``L(u, v)`` and ``R(u, v)`` at many points."""

    def __init__(self, g, u, v, af):
        self.g = g
        self.af = af
        self.hu = Horizontal(g, u)
        self.hv = Horizontal(g, v)
        P = ex.to_fraction(af.p)
        quotient = ex.div(ex.power(ex.func("abs", self.hu.u), ex.Num(P)), af.of(self.hv.u))
        self.hq = Horizontal(g, quotient)

    def _common(self, x):
        x = np.asarray(x, dtype=float)
        pts = x if x.ndim == 2 else x[:, None]
        vv = _vals(self.hv, pts)
        if np.any(vv <= 0):
            raise NonpositiveV(f"v must be positive; min v = {vv.min():.3g}")
        gv, _ = _derivs(self.hv, pts, second=False)
        return x.ndim == 1, pts, vv, gv

    def L(self, x):
        scalar, pts, vv, gv = self._common(x)
        p = self.af.p
        uu = _vals(self.hu, pts)
        gu, _ = _derivs(self.hu, pts, second=False)
        fv, dfv = self.af.value(vv), self.af.derivative(vv)
        gvp = _grad_power(gv, p)
        au = np.abs(uu)
        out = (np.sum(gu**2, axis=0) ** (p / 2)
               - p * np.sign(uu) * au ** (p - 1) / fv * np.sum(gu * gvp, axis=0)
               + dfv * au**p / fv**2 * np.sum(gv**2, axis=0) ** (p / 2))
        return out[0] if scalar else out

    def R(self, x):
        scalar, pts, vv, gv = self._common(x)
        p = self.af.p
        gu, _ = _derivs(self.hu, pts, second=False)
        gq, _ = _derivs(self.hq, pts, second=False)
        out = np.sum(gu**2, axis=0) ** (p / 2) - np.sum(gq * _grad_power(gv, p), axis=0)
        return out[0] if scalar else out


def picone_L(g, u, v, af, x):
    """``L(u, v)`` from the closed-form expansion."""
    return PiconePair(g, u, v, af).L(x)


def picone_R(g, u, v, af, x):
    """``R(u, v)`` with ``grad(|u|^p / f(v))`` differentiated symbolically."""
    return PiconePair(g, u, v, af).R(x)


def picone_scan(g, dom, u, v, af, n_samples, seed):
    """Compare ``L`` and ``R`` at ``n_samples`` seeded points of ``dom``.

    The verdict is ``max|L-R| <= 1e-9 (1 + max|L|)`` and ``min R >= -1e-9``;
    ``lhs``/``rhs`` are the sample means of ``L`` and ``R``.
    """
    pair = PiconePair(g, u, v, af)
    X = sample_points(dom, n_samples, seed)
    L, R = pair.L(X), pair.R(X)
    diff = float(np.max(np.abs(L - R)))
    maxL = float(np.max(np.abs(L)))
    minR = float(np.min(R))
    tol = 1e-9 * (1 + maxL)
    rep = IdentityReport("picone", float(np.mean(L)), float(np.mean(R)), minR, maxL, n_samples, None, tol,
                         {"max_abs_diff": diff, "min_R": minR, "max_abs_L": maxL})
    rep.verdict = diff <= tol and minR >= -1e-9
    return rep


# ---------------------------------------------------------------------------
# Hardy-type and Diaz-Saa

def hardy_gap(g, dom, u, v, af, p, rule, compact=True):
    """``int |grad_G u|^p - int |u|^p / f(v) (-L_p v)``, predicted nonnegative.

    With ``compact`` the profile is multiplied by :func:`geometry.bump` so
    that it vanishes with its gradient on the boundary.

    Raises
    ------
    VNotBoundedBelow
        ``v <= 0`` at a quadrature node.
    """
    if p != af.p:
        raise ValueError(f"p = {p} does not match the nonlinearity's p = {af.p}")
    u = as_field(u, g)
    if compact:
        u = ex.mul(u, bump(dom))
    hu, hv = _check_pair(g, u, v)
    X, W = dom.volume_nodes(rule)
    vv = _vals(hv, X)
    if np.min(vv) <= 0:
        raise VNotBoundedBelow(f"v must be bounded below by a positive constant; min v = {vv.min():.3g}")
    gu, _ = _derivs(hu, X, second=False)
    gv, Hv = _derivs(hv, X)
    uu = _vals(hu, X)
    Lv = p_laplacian_from_derivatives(gv, Hv, p)
    energy = fsum(W * np.sum(gu**2, axis=0) ** (p / 2))
    weighted = fsum(W * np.abs(uu) ** p / af.value(vv) * (-Lv))
    return energy - weighted


def diaz_saa_gap(g, dom, u1, u2, p, rule):
    """``int (-L_p u1 / u1^(p-1) + L_p u2 / u2^(p-1)) (u1^p - u2^p)``, predicted nonnegative.

    Raises
    ------
    NonpositiveInput
        ``u1`` or ``u2`` is not positive at a quadrature node.
    """
    h1, h2 = _check_pair(g, u1, u2)
    X, W = dom.volume_nodes(rule)
    a, b = _vals(h1, X), _vals(h2, X)
    if np.min(a) <= 0 or np.min(b) <= 0:
        raise NonpositiveInput("Diaz-Saa profiles must be positive on the domain")
    g1, H1 = _derivs(h1, X)
    g2, H2 = _derivs(h2, X)
    L1 = p_laplacian_from_derivatives(g1, H1, p)
    L2 = p_laplacian_from_derivatives(g2, H2, p)
    return fsum(W * (-L1 / a ** (p - 1) + L2 / b ** (p - 1)) * (a**p - b**p))


# ---------------------------------------------------------------------------
# boundary conditions

def boundary_condition_residual(g, dom, u, kind, rule, coefficients=None):
    """Integral over the boundary of the absolute condition density.

    ``kind`` is ``"dirichlet"`` (``|u|`` against Euclidean area),
    ``"neumann"`` (``|sum_j X_j u <X_j, dnu>|``) or ``"robin"``
    (``|sum_j (a_j u + X_j u) <X_j, dnu>|`` with ``coefficients = [a_j]``).

    Raises
    ------
    NegativeRobinMeasure
        ``sum_j a_j <X_j, dnu>`` is negative at a boundary node.
    """
    hu = Horizontal(g, u)
    data = boundary_data(g, dom, rule)
    uu = _vals(hu, data.points)
    if kind == "dirichlet":
        return fsum(data.weights * data.area * np.abs(uu))
    grad, _ = _derivs(hu, data.points, second=False)
    if kind == "neumann":
        density = np.sum(grad * data.pullbacks, axis=0)
    elif kind == "robin":
        if coefficients is None or len(coefficients) != g.N1:
            raise ValueError(f"robin conditions need {g.N1} coefficient expressions")
        a = np.array([np.broadcast_to(ex.evaluate_at(as_field(c, g), data.points), uu.shape)
                      for c in coefficients])
        measure = np.sum(a * data.pullbacks, axis=0)
        floor = -1e-12 * max(1.0, float(np.max(np.abs(measure))))
        if np.min(measure) < floor:
            raise NegativeRobinMeasure(f"sum a_j <X_j, dnu> reaches {measure.min():.3g} on the boundary")
        density = np.sum((a * uu + grad) * data.pullbacks, axis=0)
    else:
        raise ValueError(f"unknown boundary condition {kind!r}")
    return fsum(data.weights * np.abs(density))


# ---------------------------------------------------------------------------
# representation formula

REPRESENTATION_SUBDIV = 4


def _ray_parameter(dist, x, D, rho, iters=60):
    """Smallest ``s`` in [0, 1] with ``dist(x + s D) = rho`` (dist increasing along rays)."""
    M = D.shape[1]
    lo, hi = np.zeros(M), np.ones(M)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = np.broadcast_to(ex.evaluate_at(dist, x[:, None] + mid * D), (M,)) < rho
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def punctured_box_nodes(box, x, dist, rho, rule):
    """Quadrature nodes for ``box`` minus ``{dist < rho}`` around the interior point ``x``.

    The box is split into pyramids with apex ``x`` over each face patch;
    each ray ``x + s (phi(u) - x)`` is integrated over ``s`` from the
    excised-ball crossing to 1 with Jacobian ``s^(N-1) |det[phi - x, dphi/du]|``.
    """
    N = box.N
    U, Wu = rule.tensor(N - 1)
    t, wt = rule.nodes, rule.weights
    pts, wts = [], []
    for face in box.patches:
        Phi = face.points(U)
        D = Phi - x[:, None]
        base = np.abs(np.linalg.det(np.concatenate([D[:, None, :], face.tangents(U)], axis=1).transpose(2, 0, 1)))
        s0 = _ray_parameter(dist, x, D, rho)
        s = s0[None, :] + (1 - s0)[None, :] * t[:, None]  # (order, M)
        w = wt[:, None] * (1 - s0)[None, :] * s ** (N - 1) * (Wu * base)[None, :]
        pts.append((x[:, None, None] + s[None] * D[:, None, :]).reshape(N, -1))
        wts.append(w.ravel())
    return np.concatenate(pts, axis=1), np.concatenate(wts)


def _richardson(values, first_exponent):
    table = list(values)
    k = first_exponent
    while len(table) > 1:
        table = [(2**k * table[i + 1] - table[i]) / (2**k - 1) for i in range(len(table) - 1)]
        k += 1
    return table[0]


def representation_report(pg, g, dom, u, p, x, rule, fractions=(0.1, 0.05, 0.025)):
    """Terms of the representation formula at ``x`` with the volume term extrapolated in ``rho``.

    ``rhs = V + B`` with

    ``V = int_{dom minus B_rho(x)} (eps L_p u - (|grad eps|^(p-2) - |grad u|^(p-2)) grad eps . grad u)``
    ``B = int_boundary (|grad eps|^(p-2) u <grad~ eps, dnu> - |grad u|^(p-2) eps <grad~ u, dnu>)``

    where ``eps = eps_p(x^{-1} o y)``.  ``V`` is computed for
    ``rho = fraction * diam(dom)`` and Richardson-extrapolated to 0.

    Raises
    ------
    PoleTooCloseToBoundary
        The largest excised gauge ball does not fit inside the domain.
    """
    x = np.asarray(x, dtype=float)
    u = as_field(u, g)
    hu = Horizontal(g, u)
    ux = float(hu.value(x))
    eps = pg.expr(p, pole=x)
    he = Horizontal(g, eps)
    dist = pg.translated_gauge(x)

    # the boundary integrand peaks near the pole, so faces are refined
    fine = Box(dom.lo, dom.hi, max(dom.subdiv, REPRESENTATION_SUBDIV)) if isinstance(dom, Box) else dom
    data = boundary_data(g, fine, rule)
    dmin = float(np.min(ex.evaluate_at(dist, data.points)))
    rhos = [f * dom.diameter for f in fractions] if hasattr(dom, "diameter") else [f * dom.radius for f in fractions]
    if dmin <= max(rhos):
        raise PoleTooCloseToBoundary(f"gauge distance to the boundary {dmin:.3g} is below rho = {max(rhos):.3g}")

    ge, _ = _derivs(he, data.points, second=False)
    gu, _ = _derivs(hu, data.points, second=False)
    we = _weight_power(np.sum(ge**2, axis=0), p, 0.0)
    wu = _weight_power(np.sum(gu**2, axis=0), p, 0.0)
    ev, uv = _vals(he, data.points), _vals(hu, data.points)
    B = fsum(data.weights * (we * uv * np.sum(ge * data.pullbacks, axis=0)
                             - wu * ev * np.sum(gu * data.pullbacks, axis=0)))

    lap = ex.ZERO
    for k in range(g.N1):
        lap = ex.add(lap, hu.second[k][k])
    if p == 2 and isinstance(lap, ex.Num) and lap.value == 0:
        volumes = [0.0 for _ in rhos]
    else:
        if not isinstance(dom, Box):
            raise DomainError("the excised volume term is implemented for boxes")
        volumes = []
        for rho in rhos:
            X, W = punctured_box_nodes(dom, x, dist, rho, rule)
            gE, _ = _derivs(he, X, second=False)
            gU, HU = _derivs(hu, X)
            LU = p_laplacian_from_derivatives(gU, HU, p)
            wE = _weight_power(np.sum(gE**2, axis=0), p, 0.0)
            wU = _weight_power(np.sum(gU**2, axis=0), p, 0.0)
            integrand = _vals(he, X) * LU - (wE - wU) * np.sum(gE * gU, axis=0)
            volumes.append(fsum(W * integrand))
    V = _richardson(volumes, 2 if p == 2 else 1)
    rep = IdentityReport("representation", ux, V + B, samples=data.points.shape[1], order=rule.order,
                         extra={"boundary": B, "volume": V, "volumes": volumes, "rhos": rhos})
    return rep


def representation_residual(pg, g, dom, u, p, x, rule):
    """``|u(x) - rhs|`` of the representation formula (a diagnostic when ``p != 2``)."""
    return representation_report(pg, g, dom, u, p, x, rule).residual
