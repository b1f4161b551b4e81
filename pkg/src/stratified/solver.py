"""Finite-difference energy minimisation for ``-L_p u = F(x, u)``, ``u = 0`` on a box.

Horizontal derivatives at the nodes are ``X_k u = sum_j c_kj(x) D_j u``
with ``D_j`` the central difference along axis ``j`` (one-sided at the
faces, forming a summation-by-parts pair with the trapezoid weights).  The discrete energy

    E(u) = sum_i w_i (|grad_h u|_i^2 + eps^2)^(p/2) / p - sum_i w_i G(x_i, u_i),
    G(x, t) = int_0^t F(x, s) ds    (16-point Gauss),

uses trapezoid weights ``w`` and is minimised over interior values by
preconditioned nonlinear conjugate gradients with Armijo backtracking.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import expressions as ex
from .geometry import fsum
from .errors import (
    LineSearchStall,
    NoConvergence,
    NonPositiveEps,
    ReactionAssumptionError,
    TooCoarse,
)

GAUSS_POINTS = 16
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
_GX, _GW = np.polynomial.legendre.leggauss(GAUSS_POINTS)
_GX, _GW = 0.5 * (_GX + 1), 0.5 * _GW


# ---------------------------------------------------------------------------
# reactions

class Reaction:
    """A reaction term ``F(x, rho)`` given as an expression in ``x1..xN`` and ``rho``.

    ``clamp`` evaluates ``F(x, max(rho, 0))``, which extends reactions that
    are only meaningful for ``rho >= 0`` (such as ``rho^(1/2)``) to all
    iterates.

    Parameters
    ----------
    F : str or Expr
    p : float
        Exponent used by the structural checks.
    """

    RHO_GRID = np.logspace(-6, 6, 400)

    def __init__(self, F, p, clamp=True):
        self.F = ex.parse_expression(F) if isinstance(F, str) else ex.as_expr(F)
        self.p = p
        self.clamp = clamp
        self.dF = ex.diff(self.F, "rho")
        self.depends_on_u = "rho" in ex.free_variables(self.F)

    def __repr__(self):
        return f"Reaction({ex.to_string(self.F)!r})"

    def _env(self, X, rho):
        env = ex.coordinate_env(X)
        env["rho"] = np.maximum(rho, 0.0) if self.clamp else rho
        return env

    def __call__(self, X, rho):
        """``F`` at nodes X (N, M) and values rho (M,) or (K, M)."""
        rho = np.asarray(rho, dtype=float)
        return np.broadcast_to(ex.evaluate(self.F, self._env(X, rho)), rho.shape).astype(float)

    def derivative(self, X, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.broadcast_to(ex.evaluate(self.dF, self._env(X, rho)), rho.shape).astype(float)
        if self.clamp:
            out = np.where(rho > 0, out, 0.0)
        return out

    def primitive(self, X, t):
        """``G(x, t)`` by 16-point Gauss on ``[0, t]`` and its exact t-derivative."""
        t = np.asarray(t, dtype=float)
        if not self.depends_on_u:
            f = self(X, t)
            return t * f, f
        s = _GX[:, None] * t[None, :]
        F = self(X, s)
        G = t * (_GW @ F)
        with np.errstate(invalid="ignore"):
            pos = s > 0 if self.clamp else np.ones_like(s, dtype=bool)
            dF = np.zeros_like(s)
            if np.any(pos):
                safe = np.where(pos, s, 1.0)
                dF = np.where(pos, self.derivative(X, safe), 0.0)
        dG = _GW @ F + t * (_GW @ (_GX[:, None] * dF))
        return G, dG

    def increment(self, X, t0, t1):
        """``G(x, t1) - G(x, t0)`` without cancellation.

        Integrates the exact derivative of the Gauss primitive over
        ``[t0, t1]``, so it agrees with the gradient returned by ``primitive``.
        """
        t0, t1 = np.asarray(t0, dtype=float), np.asarray(t1, dtype=float)
        dt = t1 - t0
        if not self.depends_on_u:
            return dt * self(X, t0)
        total = np.zeros_like(dt)
        for xk, wk in zip(_GX, _GW):
            total += wk * self.primitive(X, t0 + xk * dt)[1]
        return dt * total

    def sample_x(self, lo, hi, n=8, seed=0):
        rng = np.random.default_rng(seed)
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        return lo[:, None] + (hi - lo)[:, None] * rng.random((len(lo), n))

    def check_a(self, lo, hi, seed=0):
        """Positivity and growth ``F <= C (rho^(p-1) + 1)`` on a sample grid.

        Growth is accepted when the ratio ``F / (rho^(p-1) + 1)`` over the
        top three decades does not exceed ten times its maximum below.
        """
        X = self.sample_x(lo, hi, seed=seed)
        rho = self.RHO_GRID
        for m in range(X.shape[1]):
            xs = np.repeat(X[:, m:m + 1], rho.size, axis=1)
            F = self(xs, rho)
            if not np.all(np.isfinite(F)) or np.any(F <= 0):
                return False
            ratio = F / (rho ** (self.p - 1) + 1)
            top = rho >= 1e3
            if ratio[top].max() > 10 * ratio[~top].max():
                return False
        return True

    def check_b(self, lo, hi, seed=0):
        """``rho -> F / rho^(p-1)`` strictly decreasing on the log grid at sample points."""
        X = self.sample_x(lo, hi, seed=seed)
        rho = self.RHO_GRID
        for m in range(X.shape[1]):
            xs = np.repeat(X[:, m:m + 1], rho.size, axis=1)
            q = self(xs, rho) / rho ** (self.p - 1)
            if not np.all(q[1:] < q[:-1] * (1 - 1e-12)):
                return False
        return True


class NodalLoad:
    """A ``u``-independent load given by its values at the interior nodes of one grid."""

    depends_on_u = False

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def __repr__(self):
        return f"NodalLoad(n={self.values.size})"

    def __call__(self, X, rho):
        return np.broadcast_to(self.values, np.shape(rho)).astype(float)

    def derivative(self, X, rho):
        return np.zeros(np.shape(rho))

    def primitive(self, X, t):
        t = np.asarray(t, dtype=float)
        return t * self.values, np.broadcast_to(self.values, t.shape)

    def increment(self, X, t0, t1):
        return (np.asarray(t1, dtype=float) - t0) * self.values


# ---------------------------------------------------------------------------
# grid

def _first_difference(n, h):
    """1D first-derivative matrix: central inside, one-sided two-point rows at the ends.

    Together with trapezoid weights this is the classical summation-by-parts
    pair, whose energy gives second-order accurate solutions.  Second-order
    one-sided end rows would make the scheme only first-order accurate.
    """
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1] = -1.0
        D[i, i + 1] = 1.0
    D[0, 0:2] = [-2.0, 2.0]
    D[n - 1, n - 2:n] = [-2.0, 2.0]
    return (D.tocsr() / (2 * h)).tocsr()


def _trapezoid(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


@dataclass
class Grid:
    """Tensor grid on a box with the discrete horizontal derivative operators.

    ``X[k]`` is the sparse matrix of ``X_k`` acting on all nodal values;
    ``interior`` indexes the unknowns.
    """

    group: object
    lo: np.ndarray
    hi: np.ndarray
    n: tuple
    h: np.ndarray
    points: np.ndarray  # (N, M)
    weights: np.ndarray  # (M,)
    interior: np.ndarray  # indices
    boundary: np.ndarray
    coefficients: np.ndarray  # (N1, N, M): c_kj at nodes
    D: list
    X: list = field(repr=False)
    XI: list = field(repr=False)  # X_k restricted to interior columns

    @property
    def size(self):
        return self.points.shape[1]

    def full(self, u_int):
        u = np.zeros(self.size)
        u[self.interior] = u_int
        return u

    def shape(self):
        return tuple(self.n)


def discretize(g, box, n):
    """Build the finite-difference grid on ``box`` with ``n`` nodes per axis.

    Raises
    ------
    TooCoarse
        Some ``n_i < 4``.
    """
    lo = np.asarray(box.lo if hasattr(box, "lo") else box[0], dtype=float)
    hi = np.asarray(box.hi if hasattr(box, "hi") else box[1], dtype=float)
    N = g.N
    if len(lo) != N:
        raise ValueError(f"box has dimension {len(lo)}, group has {N}")
    n = tuple([int(n)] * N) if np.isscalar(n) else tuple(int(k) for k in n)
    if min(n) < 4:
        raise TooCoarse(f"need at least 4 nodes per axis, got {n}")
    h = (hi - lo) / (np.array(n) - 1)
    axes = [np.linspace(lo[i], hi[i], n[i]) for i in range(N)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.array([m.ravel() for m in mesh])
    weights = np.ones(1)
    for i in range(N):
        weights = np.kron(weights, _trapezoid(n[i], h[i]))
    eye = [sp.identity(k, format="csr") for k in n]
    D = []
    for j in range(N):
        mats = [eye[i] if i != j else _first_difference(n[j], h[j]) for i in range(N)]
        out = mats[0]
        for m in mats[1:]:
            out = sp.kron(out, m, format="csr")
        D.append(out)
    on_bdry = np.zeros(points.shape[1], dtype=bool)
    for i in range(N):
        on_bdry |= np.isclose(points[i], lo[i]) | np.isclose(points[i], hi[i])
    interior = np.flatnonzero(~on_bdry)
    boundary = np.flatnonzero(on_bdry)
    M = points.shape[1]
    C = np.zeros((g.N1, N, M))
    Xops = []
    for k, Xk in enumerate(g.generators):
        op = sp.csr_matrix((M, M))
        for j in range(N):
            c = Xk.coeffs[j]
            if c.is_zero():
                continue
            C[k, j] = np.broadcast_to(c(points), (M,))
            op = op + sp.diags(C[k, j]) @ D[j]
        Xops.append(op.tocsr())
    XI = [op[:, interior].tocsr() for op in Xops]
    return Grid(g, lo, hi, n, h, points, weights, interior, boundary, C, D, Xops, XI)


# ---------------------------------------------------------------------------
# energy

def _check_eps(eps, p):
    if not eps > 0:
        raise NonPositiveEps(f"eps must be positive, got {eps}")


def horizontal_gradient_h(grid, u_int):
    """Nodal discrete horizontal gradient, shape (N1, M)."""
    return np.array([op @ u_int for op in grid.XI])


def _energy_state(grid, u_int, p, reaction, eps):
    """Pointwise pieces of the energy: (G, S, Gv, E, grad)."""
    _check_eps(eps, p)
    G = horizontal_gradient_h(grid, u_int)
    S = np.sum(G**2, axis=0) + eps * eps
    w = grid.weights
    E = fsum(w * S ** (p / 2)) / p
    flux = w * S ** ((p - 2) / 2)
    grad = sum(op.T @ (flux * Gk) for op, Gk in zip(grid.XI, G))
    Gv = None
    if reaction is not None:
        Xi = grid.points[:, grid.interior]
        wi = w[grid.interior]
        Gv, dG = reaction.primitive(Xi, u_int)
        Gv = np.broadcast_to(Gv, u_int.shape)
        E -= fsum(wi * Gv)
        grad = grad - wi * dG
    return G, S, Gv, float(E), np.asarray(grad)


def _energy_change(grid, old, new, p, u0, du, reaction):
    """``E(u0 + du) - E(u0)`` from pointwise differences.

    Avoids the cancellation in ``E_new - E_old`` so sufficient decrease can
    be tested below the rounding level of ``E`` itself.  For small steps the
    reaction part is integrated directly over ``[u0, u0 + du]``.
    """
    G0, S0 = old[:2]
    dG = horizontal_gradient_h(grid, du)
    dS = np.sum(dG * (2 * G0 + dG), axis=0)
    if p == 2:
        dpow = dS
    else:
        dpow = S0 ** (p / 2) * np.expm1((p / 2) * np.log1p(dS / S0))
    dE = fsum(grid.weights * dpow) / p
    if reaction is not None:
        wi = grid.weights[grid.interior]
        if np.max(np.abs(du), initial=0.0) <= 1e-3 * (1 + np.max(np.abs(u0), initial=0.0)):
            dV = reaction.increment(grid.points[:, grid.interior], u0, u0 + du)
        else:
            dV = new[2] - old[2]
        dE -= fsum(wi * dV)
    return float(dE)


def discrete_energy(grid, u_int, p, reaction, eps=1e-8):
    """Discrete energy at interior values ``u_int`` and its exact gradient.

    Returns
    -------
    E : float
    grad : ndarray
        ``dE/du_int``.
    """
    _, _, _, E, grad = _energy_state(grid, u_int, p, reaction, eps)
    return E, grad


def discrete_operator(grid, u_int, p, eps=0.0):
    """``-L_{p,h} u`` at interior nodes: the energy gradient of the principal part divided by weights."""
    G = horizontal_gradient_h(grid, u_int)
    S = np.sum(G**2, axis=0) + eps * eps
    if p == 2:
        flux = grid.weights
    else:
        with np.errstate(divide="ignore"):
            flux = grid.weights * np.where(S > 0, S, 1.0) ** ((p - 2) / 2) * (S > 0)
    grad = sum(op.T @ (flux * Gk) for op, Gk in zip(grid.XI, G))
    return np.asarray(grad) / grid.weights[grid.interior]


def weak_residual(grid, u, p, reaction, eps=1e-8, normalize=False):
    """Max over nodal test functions of the discrete weak-form defect.

    ``r_i = sum w |grad u|_eps^(p-2) grad u . grad phi_i - sum w F(x, u) phi_i``.
    With ``normalize`` each entry is divided by the energy norm of
    ``phi_i``.  ``u`` may be full nodal values or interior values.
    """
    u = np.asarray(u, dtype=float)
    u_int = u[grid.interior] if u.size == grid.size else u
    G = horizontal_gradient_h(grid, u_int)
    S = np.sum(G**2, axis=0) + eps * eps
    flux = grid.weights * S ** ((p - 2) / 2)
    r = np.asarray(sum(op.T @ (flux * Gk) for op, Gk in zip(grid.XI, G)))
    if reaction is not None:
        r = r - grid.weights[grid.interior] * reaction(grid.points[:, grid.interior], u_int)
    if normalize:
        r = r / np.sqrt(_basis_energy(grid))
    return float(np.max(np.abs(r))) if r.size else 0.0


def _basis_energy(grid):
    w = grid.weights
    out = np.zeros(grid.interior.size)
    for op in grid.XI:
        out += np.asarray(op.multiply(op).T @ w).ravel()
    return out


def _diagonal(grid):
    """Diagonal of the p = 2 Hessian, used as preconditioner."""
    d = _basis_energy(grid)
    return np.where(d > 0, d, 1.0)


# ---------------------------------------------------------------------------
# minimisation

@dataclass
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 20000
    eps: float = 1e-8
    seed: int = 0
    init: object = "zero"
    continuation: bool = False


@dataclass
class GridSolution:
    values: np.ndarray  # full nodal values
    iterations: int
    energy: float
    grad_norm: float
    weak_residual: float
    eps: float
    trace: list
    converged: bool = True

    @property
    def interior_min(self):
        return float(np.min(self.values[self._interior])) if self._interior is not None else math.nan

    _interior: np.ndarray = None


def initial_values(grid, init, seed):
    """Interior start values: ``"zero"``, ``"random"`` (U(-1,1)), ``"positive"`` or an array."""
    m = grid.interior.size
    if isinstance(init, str):
        rng = np.random.default_rng(seed)
        if init == "zero":
            return np.zeros(m)
        if init == "random":
            return rng.uniform(-1.0, 1.0, m)
        if init == "positive":
            return rng.uniform(0.05, 1.0, m)
        raise ValueError(f"unknown init {init!r}")
    arr = np.asarray(init, dtype=float)
    if arr.size == grid.size:
        arr = arr[grid.interior]
    if arr.size != m:
        raise ValueError("initial values do not match the grid")
    return arr.copy()


def _stationarity(grid, grad):
    """Max-norm of the energy gradient; equals the unnormalised weak residual."""
    return float(np.max(np.abs(grad))) if grad.size else 0.0


def _ncg(grid, u, p, reaction, eps, tol, max_iter, trace):
    """Preconditioned Polak-Ribiere+ CG with Armijo backtracking; returns (u, E, grad, iters, ok).

    Energy decreases are measured pointwise (see ``_energy_change``) so the
    sufficient-decrease test stays meaningful below the rounding level of
    ``E`` itself; the recorded trace accumulates these exact decrements.
    """
    Pinv = 1.0 / _diagonal(grid)
    state = _energy_state(grid, u, p, reaction, eps)
    E, g = state[3], state[4]
    trace.append(E)
    z = Pinv * g
    d = -z
    gz = g @ z
    n_restart = max(50, u.size)
    for it in range(max_iter):
        if _stationarity(grid, g) <= tol * (1 + abs(E)):
            return u, E, g, it, True
        slope = g @ d
        if slope >= 0:
            d = -z
            slope = -gz
        # step from a secant estimate of the curvature along d
        tau = 1e-6 * (1 + np.linalg.norm(u)) / max(np.linalg.norm(d), 1e-300)
        _, g2 = discrete_energy(grid, u + tau * d, p, reaction, eps)
        curv = (g2 - g) @ d / tau
        alpha = -slope / curv if curv > 0 else 1.0
        for _ in range(60):
            u_new = u + alpha * d
            new = _energy_state(grid, u_new, p, reaction, eps)
            dE = _energy_change(grid, state, new, p, u, u_new - u, reaction)
            if dE <= ARMIJO_C * alpha * slope:
                break
            alpha *= ARMIJO_SHRINK
        else:
            raise LineSearchStall("Armijo backtracking failed to decrease the energy")
        g_new = new[4]
        z_new = Pinv * g_new
        gz_new = g_new @ z_new
        beta = max(0.0, (gz_new - g @ z_new) / gz) if gz > 0 else 0.0
        if (it + 1) % n_restart == 0:
            beta = 0.0
        E = E + dE
        u, state, g, z, gz = u_new, new, g_new, z_new, gz_new
        d = -z + beta * d
        trace.append(E)
    return u, E, g, max_iter, _stationarity(grid, g) <= tol * (1 + abs(E))


def solve_dirichlet(grid, p, reaction, opts=None, **kw):
    """Minimise the discrete energy with zero boundary values.

    Parameters
    ----------
    grid : Grid
    p : float
    reaction : Reaction or None
    opts : SolveOptions, optional
        Keyword arguments override individual fields.

    Raises
    ------
    NoConvergence
        ``max_iter`` reached; ``.solution`` holds the last iterate and trace.
    LineSearchStall
        Backtracking could not decrease the energy.
    """
    opts = replace(opts or SolveOptions(), **kw)
    _check_eps(opts.eps, p)
    u = initial_values(grid, opts.init, opts.seed)
    trace = []
    schedule = [opts.eps]
    if opts.continuation and p != 2:
        schedule = []
        e = 1e-2
        while e > opts.eps:
            schedule.append(e)
            e /= 2
        schedule.append(opts.eps)
    iters = 0
    ok = True
    for eps in schedule:
        stage = []
        u, E, g, it, ok = _ncg(grid, u, p, reaction, eps, opts.tol, opts.max_iter - iters, stage)
        iters += it
        trace.extend(stage)
    sol = GridSolution(grid.full(u), iters, E, _stationarity(grid, g),
                       weak_residual(grid, u, p, reaction, opts.eps), opts.eps, trace, ok, grid.interior)
    if not ok:
        raise NoConvergence(f"no convergence in {opts.max_iter} iterations", sol)
    return sol


def direct_solve_p2(grid, load):
    """Solve the p = 2 discrete equations ``sum_k X_k^T W X_k u = W f`` directly (oracle)."""
    A = sum(op.T @ sp.diags(grid.weights) @ op for op in grid.XI)
    f = np.broadcast_to(np.asarray(load, dtype=float), (grid.interior.size,))
    u = spla.spsolve(A.tocsc(), grid.weights[grid.interior] * f)
    return grid.full(u)


def require_reaction_flags(reaction, grid, need_a=True, need_b=True):
    """Raise ReactionAssumptionError unless the requested structural checks pass."""
    if need_a and not reaction.check_a(grid.lo, grid.hi):
        raise ReactionAssumptionError(f"{reaction!r} fails assumption (a): positivity and growth")
    if need_b and not reaction.check_b(grid.lo, grid.hi):
        raise ReactionAssumptionError(f"{reaction!r} fails assumption (b): F/rho^(p-1) strictly decreasing")
