"""Domains, tensor-product Gauss quadrature and boundary-form integration.

The boundary (N-1)-form paired with a generator ``X_k`` is the wedge of the
coframe dual to ``{X_1..X_{N_1}, d/dx^{(l)}_m}`` with ``dx_k`` removed:

    dx_1 ^ .. (no dx_k) .. ^ dx_{N_1} ^ theta_{2,1} ^ ... ^ theta_{r,N_r},
    theta_{l,m} = dx_m^{(l)} - sum_k a^{(l)}_{k,m} dx_k.

Its pullback to a patch ``phi: [0,1]^{N-1} -> R^N`` is the determinant of
the 1-forms applied to the tangent vectors ``d phi / d u_i``.  With patches
oriented so that ``det[t_1..t_{N-1}, n_out] > 0`` the form carries the
interior-product sign ``(-1)^(k+N)`` (1-based ``k``); with that sign the
boundary integral of ``f`` equals the flux ``int f X_k . n dS``.
"""

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from . import expressions as ex
from .errors import DegenerateJacobian, DomainError


# ---------------------------------------------------------------------------
# quadrature

class QuadratureRule:
    """Gauss-Legendre rule with ``order`` points per axis, mapped to [0, 1]."""

    def __init__(self, order=8):
        if order < 1:
            raise ValueError("quadrature order must be >= 1")
        self.order = int(order)
        x, w = np.polynomial.legendre.leggauss(self.order)
        self.nodes = 0.5 * (x + 1.0)
        self.weights = 0.5 * w

    def __repr__(self):
        return f"QuadratureRule(order={self.order})"

    @property
    def exact_degree(self):
        return 2 * self.order - 1

    def tensor(self, dim):
        """Nodes of shape (dim, order**dim) and weights of shape (order**dim,) on [0,1]^dim."""
        if dim == 0:
            return np.zeros((0, 1)), np.ones(1)
        grids = np.meshgrid(*([self.nodes] * dim), indexing="ij")
        wgrids = np.meshgrid(*([self.weights] * dim), indexing="ij")
        nodes = np.array([gr.ravel() for gr in grids])
        weights = np.prod(np.array([wg.ravel() for wg in wgrids]), axis=0)
        return nodes, weights


def fsum(values):
    return math.fsum(np.ravel(values).tolist())


# ---------------------------------------------------------------------------
# boundary patches

class Patch:
    """Smooth map ``[0,1]^{N-1} -> R^N`` with an orientation sign.

    Subclasses provide ``points``, ``tangents`` and ``outward_normal``;
    ``orientation`` is fixed at construction from the Euclidean outward
    normal at the patch centre.
    """

    N = 0

    def _init_orientation(self):
        centre = np.full((self.N - 1, 1), 0.5)
        T = self.tangents(centre)[:, :, 0]
        n = self.outward_normal(centre)[:, 0]
        det = np.linalg.det(np.column_stack([T, n])) if self.N > 1 else float(n[0])
        if det == 0:
            raise DegenerateJacobian(f"patch {self!r} is degenerate at its centre")
        self.orientation = 1.0 if det > 0 else -1.0

    def points(self, U):
        raise NotImplementedError

    def tangents(self, U):
        raise NotImplementedError

    def outward_normal(self, U):
        raise NotImplementedError


class BoxFace(Patch):
    """Face ``x_axis = value`` of a box, parameterised over a sub-rectangle.

    ``free`` lists the other coordinate indices in parameter order, and
    ``lo, hi`` their ranges.
    """

    def __init__(self, N, axis, value, side, free, lo, hi):
        self.N = N
        self.axis = axis
        self.value = float(value)
        self.side = side
        self.free = list(free)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self._init_orientation()

    def __repr__(self):
        return f"BoxFace(axis={self.axis}, value={self.value}, free={self.free})"

    def points(self, U):
        M = U.shape[1]
        X = np.empty((self.N, M))
        X[self.axis] = self.value
        for i, j in enumerate(self.free):
            X[j] = self.lo[i] + (self.hi[i] - self.lo[i]) * U[i]
        return X

    def tangents(self, U):
        M = U.shape[1]
        T = np.zeros((self.N, self.N - 1, M))
        for i, j in enumerate(self.free):
            T[j, i] = self.hi[i] - self.lo[i]
        return T

    def outward_normal(self, U):
        n = np.zeros((self.N, U.shape[1]))
        n[self.axis] = self.side
        return n

    def flipped(self):
        """Same face with the first two parameters swapped."""
        if len(self.free) < 2:
            raise DomainError("cannot flip a face with fewer than two parameters")
        order = [1, 0] + list(range(2, len(self.free)))
        return BoxFace(self.N, self.axis, self.value, self.side, [self.free[i] for i in order],
                       self.lo[order], self.hi[order])


class GaugeSpherePatch(Patch):
    """The gauge sphere ``{c o y : d(y) = R}`` in hyperspherical angles.

    For a direction ``omega(u)`` on the Euclidean unit sphere the radius
    ``r(u)`` solving ``d(delta_r omega) = R`` is found by bisection along the
    dilation curve; its derivatives follow from implicit differentiation, so
    tangents are exact.  For a homogeneous gauge ``r = R / d(omega)``, which
    is smooth, so Gauss rules converge quickly even for flattened spheres.
    """

    def __init__(self, group, gauge, center, radius, lo=None, hi=None):
        self.N = group.N
        if self.N < 2:
            raise DomainError("gauge balls need N >= 2")
        self.group = group
        self.gauge = gauge
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        # angular panel [lo, hi] inside [0,1]^{N-1}
        self.lo = np.zeros(self.N - 1) if lo is None else np.asarray(lo, dtype=float)
        self.hi = np.ones(self.N - 1) if hi is None else np.asarray(hi, dtype=float)
        self._init_orientation()

    def __repr__(self):
        return f"GaugeSpherePatch(center={self.center.tolist()}, radius={self.radius})"

    @cached_property
    def _gauge_grad(self):
        return [ex.diff(self.gauge, f"x{j + 1}") for j in range(self.N)]

    @cached_property
    def _translation(self):
        """Symbolic ``c o y`` and its Jacobian in ``y``."""
        c = [ex.Num(ex.to_fraction(v)) for v in self.center]
        image = self.group.law.multiply(c, self.group.coordinates)
        jac = [[ex.diff(ex.as_expr(comp), f"x{j + 1}") for j in range(self.N)] for comp in image]
        return image, jac

    def _eval_list(self, exprs, Y):
        return np.array([np.broadcast_to(ex.evaluate_at(e, Y), Y.shape[1:]) for e in exprs])

    def translate(self, Y):
        image, _ = self._translation
        return self._eval_list([ex.as_expr(e) for e in image], Y)

    def translation_jacobian(self, Y):
        _, jac = self._translation
        return np.array([self._eval_list(row, Y) for row in jac])

    @cached_property
    def weights(self):
        return np.asarray(self.group.weights, dtype=float)

    def radial(self, U):
        """Direction ``omega``, its u-derivatives and the dilation radius ``r``."""
        span = self.hi - self.lo
        omega, domega = sphere_directions(self.lo[:, None] + span[:, None] * U)
        domega = domega * span[None, :, None]
        r = gauge_radius(self.gauge, omega, self.radius, self.weights)
        return omega, domega, r

    def sphere_points(self, U):
        """Points ``y(u) = delta_r(u) omega(u)`` (before translation) and ``dy/du``."""
        omega, domega, r = self.radial(U)
        w = self.weights[:, None]
        rw = r[None, :] ** w
        Y = rw * omega
        dY_dr = w * r[None, :] ** (w - 1) * omega
        G = self._eval_list(self._gauge_grad, Y)
        dY_du = rw[:, None, :] * domega
        dr = -np.einsum("jm,jim->im", G, dY_du) / np.sum(G * dY_dr, axis=0)
        dY = dY_dr[:, None, :] * dr[None, :, :] + dY_du
        return Y, dY

    def points(self, U):
        Y, _ = self.sphere_points(U)
        return self.translate(Y)

    def tangents(self, U):
        Y, dY = self.sphere_points(U)
        J = self.translation_jacobian(Y)
        return np.einsum("abm,bim->aim", J, dY)

    def outward_normal(self, U):
        Y, _ = self.sphere_points(U)
        G = self._eval_list(self._gauge_grad, Y)
        J = self.translation_jacobian(Y)
        out = np.empty_like(G)
        for m in range(G.shape[1]):
            out[:, m] = np.linalg.solve(J[:, :, m].T, G[:, m])
        return out


def sphere_directions(U):
    """Unit vectors on S^{N-1} from hyperspherical angles and their u-derivatives.

    ``U`` has shape (N-1, M); angles are ``pi*u_i`` except the last, ``2*pi*u``.
    Returns ``omega`` (N, M) and ``d omega / d u`` (N, N-1, M).
    """
    n_ang, M = U.shape
    N = n_ang + 1
    scale = np.full(n_ang, np.pi)
    scale[-1] = 2 * np.pi
    a = U * scale[:, None]
    s, c = np.sin(a), np.cos(a)
    omega = np.empty((N, M))
    domega = np.zeros((N, n_ang, M))
    for j in range(N):
        prod_sin = np.prod(s[:j], axis=0) if j else np.ones(M)
        last = c[j] if j < n_ang else np.ones(M)
        omega[j] = prod_sin * last
        for m in range(min(j, n_ang)):
            others = np.prod(np.delete(s[:j], m, axis=0), axis=0) if j > 1 else np.ones(M)
            domega[j, m] = others * c[m] * last * scale[m]
        if j < n_ang:
            domega[j, j] = -prod_sin * s[j] * scale[j]
    return omega, domega


def gauge_radius(gauge, omega, R, weights=None, tol=1e-12):
    """Solve ``gauge(delta_r omega) = R`` for ``r > 0`` along each direction by bisection."""
    M = omega.shape[1]
    w = np.ones((omega.shape[0], 1)) if weights is None else np.asarray(weights, dtype=float)[:, None]

    def d(r):
        return np.broadcast_to(ex.evaluate_at(gauge, r[None, :] ** w * omega), (M,))

    lo = np.zeros(M)
    hi = np.full(M, max(R, 1.0))
    for _ in range(200):
        short = d(hi) < R
        if not np.any(short):
            break
        hi = np.where(short, 2 * hi, hi)
    else:
        raise DomainError("gauge sphere is not bounded along some direction")
    while np.max(hi - lo) > tol * max(1.0, float(np.max(hi))):
        mid = 0.5 * (lo + hi)
        below = d(mid) < R
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# domains

class Box:
    """Axis-aligned box ``prod [lo_i, hi_i]``.

    ``subdiv`` splits every axis into equal pieces for composite quadrature
    on the volume and on each face.
    """

    kind = "box"

    def __init__(self, lo, hi, subdiv=1):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise DomainError(f"invalid box bounds {lo} .. {hi}")
        self.N = len(self.lo)
        self.subdiv = int(subdiv)

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"

    def config(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def centre(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lo) and np.all(x < self.hi))

    def _cells(self, lo, hi):
        s = self.subdiv
        edges = [np.linspace(a, b, s + 1) for a, b in zip(lo, hi)]
        for idx in np.ndindex(*([s] * len(lo))):
            yield (np.array([e[i] for e, i in zip(edges, idx)]), np.array([e[i + 1] for e, i in zip(edges, idx)]))

    def volume_nodes(self, rule):
        U, W = rule.tensor(self.N)
        pts, wts = [], []
        for a, b in self._cells(self.lo, self.hi):
            pts.append(a[:, None] + (b - a)[:, None] * U)
            wts.append(W * np.prod(b - a))
        return np.concatenate(pts, axis=1), np.concatenate(wts)

    @cached_property
    def patches(self):
        out = []
        for axis in range(self.N):
            free = [j for j in range(self.N) if j != axis]
            for side, value in ((-1, self.lo[axis]), (1, self.hi[axis])):
                if not free:
                    out.append(BoxFace(self.N, axis, value, side, [], [], []))
                    continue
                for a, b in self._cells(self.lo[free], self.hi[free]):
                    out.append(BoxFace(self.N, axis, value, side, free, a, b))
        return out

    def split(self, axis, at):
        """Two sub-boxes sharing the face ``x_axis = at``."""
        hi1 = self.hi.copy()
        hi1[axis] = at
        lo2 = self.lo.copy()
        lo2[axis] = at
        return Box(self.lo, hi1, self.subdiv), Box(lo2, self.hi, self.subdiv)


class GaugeBall:
    """``{x : d(c^{-1} o x) < R}`` for a group with a closed-form law and a gauge ``d``."""

    kind = "gauge_ball"

    def __init__(self, group, gauge, center, radius, subdiv=4):
        self.group = group
        self.gauge = gauge
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.radius <= 0:
            raise DomainError("gauge ball radius must be positive")
        self.N = group.N
        self.subdiv = int(subdiv)
        edges = np.linspace(0.0, 1.0, self.subdiv + 1)
        self.patches = [
            GaugeSpherePatch(group, gauge, self.center, self.radius,
                             [edges[i] for i in idx], [edges[i + 1] for i in idx])
            for idx in np.ndindex(*([self.subdiv] * (self.N - 1)))
        ]

    def __repr__(self):
        return f"GaugeBall(center={self.center.tolist()}, radius={self.radius})"

    def config(self):
        return {"kind": "gauge_ball", "center": self.center.tolist(), "radius": self.radius}

    def volume_nodes(self, rule):
        """Nodes ``c o delta_rho(y(u))`` over ``(rho, u)`` in [0,1]^N with exact Jacobian.

        The Jacobian is ``rho^(Q-1) |det[w * y, dy/du]|`` with ``w`` the
        dilation weights.
        """
        U, W = rule.tensor(self.N - 1)
        rho, wr = rule.nodes, rule.weights
        all_pts, all_wts = [], []
        for patch in self.patches:
            Y, dY = patch.sphere_points(U)
            wy = patch.weights[:, None] * Y
            base = np.abs(np.linalg.det(np.concatenate([wy[:, None, :], dY], axis=1).transpose(2, 0, 1)))
            scale = rho[:, None, None] ** patch.weights[None, :, None]
            pts = (scale * Y[None]).transpose(1, 0, 2).reshape(self.N, -1)
            jac = (rho[:, None] ** (self.group.Q - 1) * base[None, :]).ravel()
            wts = (wr[:, None] * W[None, :]).ravel()
            J = patch.translation_jacobian(pts)
            detJ = np.abs(np.linalg.det(J.transpose(2, 0, 1)))
            all_pts.append(patch.translate(pts))
            all_wts.append(wts * jac * detJ)
        return np.concatenate(all_pts, axis=1), np.concatenate(all_wts)


def make_domain(cfg, group=None, gauge=None):
    """Domain from a config mapping (``kind: box`` or ``kind: gauge_ball``)."""
    kind = cfg.get("kind", "box")
    if kind == "box":
        return Box(cfg["lo"], cfg["hi"], cfg.get("subdiv", 1))
    if kind == "gauge_ball":
        if gauge is None:
            raise DomainError("gauge_ball domains need a calibrated gauge")
        return GaugeBall(group, gauge, cfg["center"], cfg["radius"], cfg.get("subdiv", 4))
    raise DomainError(f"unknown domain kind {kind!r}")


# ---------------------------------------------------------------------------
# integration

def _integrand(f, g, X):
    """Values of ``f`` (expression, text, number or callable) at points X (N, M)."""
    M = X.shape[1]
    if callable(f) and not isinstance(f, ex.Expr):
        return np.broadcast_to(np.asarray(f(X), dtype=float), (M,))
    if isinstance(f, str):
        f = ex.parse_expression(f, n_coords=g.N if g is not None else None)
    return np.broadcast_to(ex.evaluate_at(ex.as_expr(f), X), (M,))


def volume_integral(g, dom, f, rule):
    """Tensor-product Gauss approximation of ``int_dom f dx``."""
    X, W = dom.volume_nodes(rule)
    return fsum(W * _integrand(f, g, X))


def coframe(g, X):
    """Matrix of the 1-forms ``dx_j^{(1)}, theta_{l,m}`` at points X: shape (N, N, M).

    Row ``j`` holds the components of the j-th 1-form.
    """
    N, M = X.shape
    Theta = np.zeros((N, N, M))
    Theta[np.arange(N), np.arange(N)] = 1.0
    for k, Xk in enumerate(g.generators):
        for j in range(g.N1, N):
            c = Xk.coeffs[j]
            if not c.is_zero():
                Theta[j, k] -= np.broadcast_to(c(X), (M,))
    return Theta


def pullback_determinants(g, X, T):
    """Determinant of the boundary 1-forms (with ``dx_k`` removed) on tangents, per k.

    ``T`` has shape (N, N-1, M).  Returns shape (N_1, M) without orientation sign.
    """
    N, M = X.shape
    if N == 1:
        return np.ones((1, M))
    Om = np.einsum("jam,aim->jim", coframe(g, X), T)
    out = np.empty((g.N1, M))
    for k in range(g.N1):
        rows = [j for j in range(N) if j != k]
        out[k] = np.linalg.det(Om[rows].transpose(2, 0, 1))
    return out


@dataclass
class BoundaryData:
    points: np.ndarray  # (N, M)
    weights: np.ndarray  # (M,) parameter-space quadrature weights
    pullbacks: np.ndarray  # (N1, M) oriented pullback of <X_k, dnu>
    area: np.ndarray  # (M,) Euclidean area element
    patch_index: np.ndarray  # (M,)


def boundary_data(g, dom, rule):
    """Quadrature nodes on every patch with the oriented pullbacks of all boundary forms."""
    N = dom.N
    if g.N != N:
        raise DomainError(f"domain dimension {N} does not match group dimension {g.N}")
    U, W = rule.tensor(N - 1)
    pts, wts, pbs, areas, idx = [], [], [], [], []
    for i, patch in enumerate(dom.patches):
        X = patch.points(U)
        T = patch.tangents(U)
        if N > 1:
            gram = np.einsum("aim,ajm->mij", T, T)
            sv = np.linalg.svd(T.transpose(2, 0, 1), compute_uv=False)
            if np.any(sv[:, -1] <= 1e-14 * np.maximum(sv[:, 0], 1e-300)):
                raise DegenerateJacobian(f"tangent vectors of {patch!r} are rank deficient at a node")
            area = np.sqrt(np.linalg.det(gram))
        else:
            area = np.ones(X.shape[1])
        sign = np.array([(-1.0) ** (k + 1 + N) for k in range(g.N1)])[:, None]
        P = patch.orientation * sign * pullback_determinants(g, X, T)
        pts.append(X)
        wts.append(W)
        pbs.append(P)
        areas.append(area)
        idx.append(np.full(X.shape[1], i))
    return BoundaryData(np.concatenate(pts, axis=1), np.concatenate(wts), np.concatenate(pbs, axis=1),
                        np.concatenate(areas), np.concatenate(idx))


def interior_product_pullbacks(g, X, T, orientation):
    """Independent route: ``(-1)^(N-1) det[X_k, t_1..t_{N-1}]`` times the patch orientation."""
    N, M = X.shape
    out = np.empty((g.N1, M))
    for k, Xk in enumerate(g.generators):
        V = Xk.evaluate(X)
        out[k] = np.linalg.det(np.concatenate([V[:, None, :], T], axis=1).transpose(2, 0, 1))
    return orientation * (-1.0) ** (N - 1) * out


def boundary_form_integral(g, dom, k, f, rule, data=None):
    """``sum_patches int f(phi(u)) pullback(<X_k, dnu>)(u) du`` (``k`` is 0-based)."""
    data = data or boundary_data(g, dom, rule)
    return fsum(data.weights * _integrand(f, g, data.points) * data.pullbacks[k])


def divergence_sides(g, dom, fields, rule):
    """Both sides of the divergence formula for ``f_1..f_{N_1}``: (volume, boundary)."""
    from .fields import apply_vector_field

    fields = [ex.as_expr(f) if not isinstance(f, str) else ex.parse_expression(f, n_coords=g.N) for f in fields]
    if len(fields) != g.N1:
        raise ValueError(f"need {g.N1} fields, got {len(fields)}")
    div = ex.ZERO
    for k, f in enumerate(fields):
        div = ex.add(div, apply_vector_field(g, k, f))
    lhs = volume_integral(g, dom, div, rule)
    data = boundary_data(g, dom, rule)
    rhs = fsum([fsum(data.weights * _integrand(f, g, data.points) * data.pullbacks[k]) for k, f in enumerate(fields)])
    return lhs, rhs


def divergence_residual(g, dom, fields, rule):
    """``|int sum X_k f_k - int_boundary sum f_k <X_k, dnu>|``."""
    lhs, rhs = divergence_sides(g, dom, fields, rule)
    return abs(lhs - rhs)


def energy_seminorm(g, dom, u, p, rule):
    """``(int_dom |grad_G u|^p dx)^(1/p)``."""
    from .fields import Horizontal

    if p <= 1:
        raise ValueError("p must exceed 1")
    X, W = dom.volume_nodes(rule)
    grad = Horizontal(g, u).gradient(X)
    mag = np.sqrt(np.sum(grad**2, axis=0))
    return fsum(W * mag**p) ** (1.0 / p)


def sample_points(dom, n, seed):
    """``n`` seeded points inside ``dom``, shape (N, n).

    Boxes are sampled uniformly.  Gauge balls use uniform ``(rho, u)`` in the
    dilation-curve parameterisation, which covers the ball but is not
    uniform in volume.
    """
    rng = np.random.default_rng(seed)
    if isinstance(dom, Box):
        return dom.lo[:, None] + (dom.hi - dom.lo)[:, None] * rng.random((dom.N, n))
    if isinstance(dom, GaugeBall):
        whole = GaugeSpherePatch(dom.group, dom.gauge, dom.center, dom.radius)
        Y, _ = whole.sphere_points(rng.random((dom.N - 1, n)))
        rho = rng.random(n) * 0.999
        return whole.translate(rho[None, :] ** whole.weights[:, None] * Y)
    raise DomainError(f"cannot sample {dom!r}")


def bump(dom):
    """Polynomial ``prod_i (1 - s_i^2)^2`` with ``s_i`` the box coordinates rescaled to [-1, 1].

    It vanishes to second order on every face, so ``w * bump`` and its
    horizontal gradient vanish on the boundary.
    """
    if not isinstance(dom, Box):
        raise DomainError("the compact-support bump is defined on boxes")
    out = ex.ONE
    for i in range(dom.N):
        lo, hi = ex.to_fraction(dom.lo[i]), ex.to_fraction(dom.hi[i])
        s = ex.div(ex.sub(ex.mul(ex.Num(2), ex.coordinate(i)), ex.Num(lo + hi)), ex.Num(hi - lo))
        out = ex.mul(out, ex.power(ex.sub(ex.ONE, ex.power(s, ex.Num(2))), ex.Num(2)))
    return out
