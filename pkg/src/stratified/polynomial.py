"""Sparse multivariate polynomials with exact rational coefficients.

A polynomial in ``n`` variables is a mapping from exponent tuples to
``Fraction`` coefficients.  Zero coefficients are never stored, so the
zero polynomial is the empty mapping and structural checks (homogeneity,
vanishing divergence, Jacobi identity) are exact.
"""

from fractions import Fraction
from itertools import product

import numpy as np


class Polynomial:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = int(nvars)
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.nvars:
                raise ValueError(f"exponent tuple {exps} has wrong length for {nvars} variables")
            c = Fraction(c)
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
                if not clean[exps]:
                    del clean[exps]
        self.terms = clean

    @classmethod
    def constant(cls, nvars, value):
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars, index):
        exps = [0] * nvars
        exps[index] = 1
        return cls(nvars, {tuple(exps): 1})

    def is_zero(self):
        return not self.terms

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("polynomials live in different rings")
            return other
        return Polynomial.constant(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out = {}
        for (e1, c1), (e2, c2) in product(self.terms.items(), other.terms.items()):
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, n):
        n = int(n)
        if n < 0:
            raise ValueError("negative powers are not polynomials")
        result = Polynomial.constant(self.nvars, 1)
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            try:
                other = self._coerce(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def diff(self, j):
        out = {}
        for e, c in self.terms.items():
            if e[j]:
                e2 = list(e)
                e2[j] -= 1
                out[tuple(e2)] = c * e[j]
        return Polynomial(self.nvars, out)

    def variables(self):
        """Indices of variables that actually occur."""
        used = set()
        for e in self.terms:
            used.update(i for i, k in enumerate(e) if k)
        return used

    def weighted_degrees(self, weights):
        """Set of weighted degrees of the monomials (``sum w_i e_i``)."""
        return {sum(w * k for w, k in zip(weights, e)) for e in self.terms}

    def is_homogeneous(self, weights, degree):
        return all(d == degree for d in self.weighted_degrees(weights))

    def scale_variables(self, factors):
        """Substitute ``x_i -> factors[i] * x_i`` exactly."""
        out = {}
        for e, c in self.terms.items():
            s = Fraction(c)
            for f, k in zip(factors, e):
                s *= Fraction(f) ** k
            out[e] = s
        return Polynomial(self.nvars, out)

    def __call__(self, x):
        """Evaluate at ``x`` (a sequence of coordinates, scalars or equal-shape arrays)."""
        total = np.zeros(np.shape(x[0])) if self.nvars else 0.0
        for e, c in self.terms.items():
            term = float(c)
            for xi, k in zip(x, e):
                if k:
                    term = term * xi**k
            total = total + term
        return total

    def evaluate_exact(self, x):
        total = Fraction(0)
        for e, c in self.terms.items():
            term = c
            for xi, k in zip(x, e):
                term *= Fraction(xi) ** k
            total += term
        return total

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self.to_string()!r})"

    def to_string(self, names=None):
        names = names or [f"x{i + 1}" for i in range(self.nvars)]
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, reverse=True):
            c = self.terms[e]
            factors = []
            for name, k in zip(names, e):
                if k == 1:
                    factors.append(name)
                elif k > 1:
                    factors.append(f"{name}^{k}")
            sign = "-" if c < 0 else ""
            a = abs(c)
            body = "*".join(factors)
            if not factors:
                text = f"{a.numerator}" if a.denominator == 1 else f"{a.numerator}/{a.denominator}"
            elif a == 1:
                text = body
            elif a.denominator == 1:
                text = f"{a.numerator}*{body}"
            elif a.numerator == 1:
                text = f"{body}/{a.denominator}"
            else:
                text = f"{a.numerator}*{body}/{a.denominator}"
            parts.append(sign + text)
        return " + ".join(parts).replace("+ -", "- ")
