"""Horizontal differential operators applied to symbolic scalar fields.

Derivatives are always symbolic; numbers only appear at evaluation time.
Where a power ``|grad u|^(p-2)`` occurs it is regularised as
``w^(p-2)`` with ``w = (|grad u|^2 + eps^2)^(1/2)``; ``eps = 0`` is exact.
"""

import numpy as np

from . import expressions as ex
from .errors import SingularGradient
from .groups import VectorField


def as_field(u, g=None):
    if isinstance(u, ex.Expr):
        return u
    if isinstance(u, str):
        return ex.parse_expression(u, n_coords=g.N if g is not None else None)
    return ex.as_expr(u)


def apply_vector_field(g, V, u):
    """Symbolic ``V u = sum_j c_j du/dx_j``.

    ``V`` is a :class:`VectorField` or the 0-based index of a generator.
    """
    u = as_field(u, g)
    if not isinstance(V, VectorField):
        coeffs = g.generator_expressions()[V]
    else:
        coeffs = V.expressions()
    out = ex.ZERO
    for j, c in enumerate(coeffs):
        if isinstance(c, ex.Num) and c.value == 0:
            continue
        out = ex.add(out, ex.mul(c, ex.diff(u, f"x{j + 1}")))
    return out


class Horizontal:
    """Cached first and second horizontal derivatives of one field.

    ``first[k] = X_k u`` and ``second[k][j] = X_k X_j u``, built on demand.
    """

    def __init__(self, g, u):
        self.g = g
        self.u = as_field(u, g)
        self._first = None
        self._second = None

    @property
    def first(self):
        if self._first is None:
            self._first = [apply_vector_field(self.g, k, self.u) for k in range(self.g.N1)]
        return self._first

    @property
    def second(self):
        if self._second is None:
            self._second = [[apply_vector_field(self.g, k, Xj) for Xj in self.first] for k in range(self.g.N1)]
        return self._second

    def value(self, x):
        return ex.evaluate_at(self.u, x)

    def gradient(self, x):
        return np.array([ex.evaluate_at(e, x) for e in self.first])

    def hessian(self, x):
        return np.array([[ex.evaluate_at(e, x) for e in row] for row in self.second])


def horizontal_gradient(g, u, x):
    """``(X_1 u(x), ..., X_{N_1} u(x))``; ``x`` of shape (N,) or (N, M)."""
    return Horizontal(g, u).gradient(x)


def _weight_power(sq, p, eps, what="grad u"):
    """``(sq + eps^2)^((p-2)/2)`` with the degenerate cases of eps = 0 resolved."""
    w2 = sq + eps * eps
    if p == 2:
        return np.ones_like(w2)
    zero = w2 == 0
    if np.any(zero):
        if p < 2:
            raise SingularGradient(f"|{what}| vanishes and p = {p} < 2")
        out = np.zeros_like(w2)
        np.power(w2, (p - 2) / 2, out=out, where=~zero)
        return out
    return w2 ** ((p - 2) / 2)


def p_laplacian_from_derivatives(grad, hess, p, eps=0.0):
    """``sum_k X_k(w^(p-2) X_k u)`` from numeric first and second horizontal derivatives.

    ``grad`` has shape (N1, ...) and ``hess[k, j] = X_k X_j u`` shape (N1, N1, ...).
    """
    trace = np.einsum("kk...->...", hess)
    if p == 2:
        return trace
    sq = np.sum(grad**2, axis=0)
    quad = np.einsum("k...,kj...,j...->...", grad, hess, grad)
    w2 = sq + eps * eps
    zero = w2 == 0
    if np.any(zero) and p < 2:
        raise SingularGradient(f"horizontal gradient vanishes and p = {p} < 2")
    with np.errstate(divide="ignore", invalid="ignore"):
        wp2 = np.where(zero, 0.0, np.abs(w2) ** ((p - 2) / 2))
        wp4 = np.where(zero, 0.0, np.abs(w2) ** ((p - 4) / 2))
        out = wp2 * trace + (p - 2) * wp4 * quad
    return np.where(zero, 0.0, out)


def p_sub_laplacian(g, u, p, x, eps=0.0):
    """Evaluate ``L_p u = div_G(w^(p-2) grad_G u)`` at ``x`` via symbolic second derivatives.

    For ``p == 2`` this is exactly ``sum_k X_k X_k u``.  With ``eps == 0`` a
    vanishing horizontal gradient raises SingularGradient when ``p < 2`` and
    gives the limiting value 0 when ``p > 2``.
    """
    h = u if isinstance(u, Horizontal) else Horizontal(g, u)
    hess = h.hessian(x)
    grad = h.gradient(x) if p != 2 else None
    if p == 2:
        return np.einsum("kk...->...", hess)[()]
    return p_laplacian_from_derivatives(grad, hess, p, eps)[()]


def weighted_gradient_pairing(g, u, v, x, p, eps=0.0):
    """``|grad_G u|^(p-2) sum_k X_k u X_k v`` at ``x``."""
    hu = u if isinstance(u, Horizontal) else Horizontal(g, u)
    hv = v if isinstance(v, Horizontal) else Horizontal(g, v)
    gu = hu.gradient(x)
    gv = hv.gradient(x)
    dot = np.sum(gu * gv, axis=0)
    if p == 2:
        return dot[()]
    sq = np.sum(gu**2, axis=0)
    return (_weight_power(sq, p, eps) * dot)[()]


def infinity_sub_laplacian(g, d, x):
    """``(1/2) grad_G |grad_G d|^2 . grad_G d`` evaluated at ``x``.

    Equals ``sum_{k,j} X_k d * X_k X_j d * X_j d``.
    """
    h = d if isinstance(d, Horizontal) else Horizontal(g, d)
    grad = h.gradient(x)
    hess = h.hessian(x)
    return np.einsum("k...,kj...,j...->...", grad, hess, grad)[()]


def power_of_gradient_expr(g, u, p):
    """Symbolic ``|grad_G u|^(p-2)`` (``1`` for ``p == 2``)."""
    h = u if isinstance(u, Horizontal) else Horizontal(g, u)
    if p == 2:
        return ex.ONE
    sq = ex.ZERO
    for e in h.first:
        sq = ex.add(sq, ex.power(e, ex.Num(2)))
    return ex.power(sq, ex.Num(ex.to_fraction(p - 2) / 2))
