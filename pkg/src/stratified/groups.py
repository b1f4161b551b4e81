"""Stratified Lie groups on R^N as validated data.

A group is described by its strata sizes ``N_1..N_r`` and, for each first
stratum generator ``k``, the polynomial coefficients ``a[(l, k, m)]`` of

    X_k = d/dx_k^{(1)} + sum_{l>=2} sum_m a[(l, k, m)](x) d/dx_m^{(l)}.

All structural checks (homogeneity, brackets, divergence) are exact, on
:class:`~stratified.polynomial.Polynomial` coefficients.  Coordinates are
numbered globally ``x1..xN`` stratum by stratum.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import expressions as ex
from .errors import (
    BadStrata,
    GroupSpecError,
    HomogeneityViolation,
    NonPositiveLambda,
    RankDeficient,
    UnsupportedGroupLaw,
)
from .polynomial import Polynomial

RANK_TOL = 1e-10
RANK_SEED = 20240611
N_RANK_SAMPLES = 8


@dataclass(frozen=True)
class StratifiedGroupSpec:
    """Raw description of a group; validated by :func:`build_group`.

    ``coeffs`` maps ``(l, k, m)`` (1-based stratum ``l >= 2``, generator
    ``k <= N_1``, component ``m <= N_l``) to a Polynomial; missing entries
    are zero.  ``preset`` names a shipped closed-form group law.
    """

    name: str
    strata: tuple
    coeffs: dict = field(default_factory=dict, hash=False, compare=False)
    preset: str | None = None
    law: object = field(default=None, hash=False, compare=False)


class VectorField:
    """Polynomial vector field ``sum_j c_j d/dx_j`` on R^N."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = tuple(coeffs)

    @property
    def dim(self):
        return len(self.coeffs)

    def __eq__(self, other):
        return isinstance(other, VectorField) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __add__(self, other):
        return VectorField(a + b for a, b in zip(self.coeffs, other.coeffs))

    def __sub__(self, other):
        return VectorField(a - b for a, b in zip(self.coeffs, other.coeffs))

    def scale(self, c):
        return VectorField(a * c for a in self.coeffs)

    def is_zero(self):
        return all(c.is_zero() for c in self.coeffs)

    def apply(self, poly):
        """Apply the field to a polynomial (exact)."""
        out = Polynomial(self.dim)
        for j, c in enumerate(self.coeffs):
            if not c.is_zero():
                out = out + c * poly.diff(j)
        return out

    def divergence(self):
        """Euclidean divergence ``sum_j d c_j / d x_j`` (a Polynomial)."""
        out = Polynomial(self.dim)
        for j, c in enumerate(self.coeffs):
            out = out + c.diff(j)
        return out

    def evaluate(self, x):
        """Coefficient vector at point(s) ``x``: shape (N,) or (N, M)."""
        x = np.asarray(x, dtype=float)
        return np.array([np.broadcast_to(c(x), x.shape[1:]) if not c.is_zero() else np.zeros(x.shape[1:])
                         for c in self.coeffs])

    def expressions(self):
        return [ex.from_polynomial(c) for c in self.coeffs]

    def __repr__(self):
        return "VectorField(" + ", ".join(c.to_string() for c in self.coeffs) + ")"


def lie_bracket(V, W):
    """Exact commutator ``[V, W]_j = sum_i V_i d_i W_j - W_i d_i V_j``."""
    return VectorField(V.apply(wj) - W.apply(vj) for vj, wj in zip(V.coeffs, W.coeffs))


def coordinate_field(n, j):
    return VectorField(Polynomial.constant(n, 1 if i == j else 0) for i in range(n))


# ---------------------------------------------------------------------------
# group laws

class StepTwoLaw:
    """``x o y = x + y + M(x^(1), y^(1))`` with ``M^m(x, y) = sum A^m_{ik} x_i y_k``.

    This is the group law whose left-invariant fields have the linear
    second-stratum coefficients ``a_{k,m}(x) = sum_i A^m_{ik} x_i``.
    Works on any scalar type supporting ``+`` and ``*`` (floats, arrays,
    Fractions, expressions).
    """

    def __init__(self, strata, tensor):
        self.strata = tuple(strata)
        self.tensor = tensor  # tensor[m][(i, k)] = A^m_{ik}

    def multiply(self, x, y):
        n1 = self.strata[0]
        out = [xi + yi for xi, yi in zip(x, y)]
        for m, entries in enumerate(self.tensor):
            for (i, k), a in entries.items():
                out[n1 + m] = out[n1 + m] + _scaled(a, x[i] * y[k])
        return out

    def inverse(self, x):
        n1 = self.strata[0]
        out = [-xi for xi in x]
        for m, entries in enumerate(self.tensor):
            for (i, k), a in entries.items():
                out[n1 + m] = out[n1 + m] + _scaled(a, x[i] * x[k])
        return out


class EngelLaw:
    """Closed-form law of the Engel group in exponential coordinates.

    Brackets ``[e1, e2] = e3``, ``[e1, e3] = e4``; the truncated BCH series
    is exact because the algebra is nilpotent of step 3.
    """

    strata = (2, 1, 1)

    def multiply(self, x, y):
        c3 = x[0] * y[1] - x[1] * y[0]
        z4 = (x[3] + y[3] + _scaled(Fraction(1, 2), x[0] * y[2] - x[2] * y[0])
              + _scaled(Fraction(1, 12), (x[0] - y[0]) * c3))
        return [x[0] + y[0], x[1] + y[1], x[2] + y[2] + _scaled(Fraction(1, 2), c3), z4]

    def inverse(self, x):
        return [-xi for xi in x]


class AbelianLaw:
    def __init__(self, n):
        self.strata = (n,)

    def multiply(self, x, y):
        return [xi + yi for xi, yi in zip(x, y)]

    def inverse(self, x):
        return [-xi for xi in x]


def _scaled(a, value):
    if isinstance(value, ex.Expr):
        return ex.as_expr(a) * value
    if isinstance(value, (Fraction, int)):
        return Fraction(a) * value
    return float(a) * value


# ---------------------------------------------------------------------------
# the validated group

class StratifiedGroup:
    """A validated stratified group.  Build with :func:`build_group` or a preset."""

    def __init__(self, spec, generators, law):
        self.spec = spec
        self.name = spec.name
        self.strata = tuple(spec.strata)
        self.N = sum(self.strata)
        self.N1 = self.strata[0]
        self.step = len(self.strata)
        self.Q = sum((i + 1) * n for i, n in enumerate(self.strata))
        self.generators = tuple(generators)
        self.law = law
        self.weights = tuple(i + 1 for i, n in enumerate(self.strata) for _ in range(n))
        self._gen_exprs = None

    def __repr__(self):
        return f"StratifiedGroup({self.name!r}, strata={list(self.strata)}, Q={self.Q})"

    @property
    def coordinates(self):
        return [ex.coordinate(i) for i in range(self.N)]

    def generator_expressions(self):
        """Coefficient expressions of each generator (list of N_1 lists of N)."""
        if self._gen_exprs is None:
            self._gen_exprs = tuple(tuple(X.expressions()) for X in self.generators)
        return self._gen_exprs

    def stratum_of(self, j):
        return self.weights[j]

    def multiply(self, x, y):
        return group_multiply(self, x, y)

    def inverse(self, x):
        if self.law is None:
            raise UnsupportedGroupLaw(f"group {self.name!r} has no closed-form law")
        return self.law.inverse(list(x))

    def dilate(self, lam, x):
        return dilate(self, lam, x)


def build_group(spec):
    """Validate ``spec`` and return a :class:`StratifiedGroup`.

    Checks exact homogeneity and stratum dependence of every coefficient and
    the Hoermander rank at the origin plus 8 seeded random points.
    """
    strata = tuple(spec.strata)
    if not strata or any((not isinstance(n, (int, np.integer))) or n <= 0 for n in strata):
        raise BadStrata(f"strata must be a nonempty list of positive integers, got {list(strata)}")
    N = sum(strata)
    N1 = strata[0]
    r = len(strata)
    weights = [i + 1 for i, n in enumerate(strata) for _ in range(n)]
    offsets = np.concatenate([[0], np.cumsum(strata)]).astype(int)

    for key, poly in spec.coeffs.items():
        l, k, m = key
        if not (2 <= l <= r and 1 <= k <= N1 and 1 <= m <= strata[l - 1]):
            raise GroupSpecError(f"coefficient index {key} out of range for strata {list(strata)}")
        if poly.nvars != N:
            raise GroupSpecError(f"coefficient {key} has {poly.nvars} variables, expected {N}")
        if any(weights[j] >= l for j in poly.variables()):
            raise HomogeneityViolation(f"coefficient a^({l})_{k},{m} depends on coordinates of stratum >= {l}")
        if not poly.is_homogeneous(weights, l - 1):
            raise HomogeneityViolation(
                f"coefficient a^({l})_{k},{m} = {poly.to_string()} is not homogeneous of degree {l - 1}")
        lam = Fraction(3)
        scaled = poly.scale_variables([lam**w for w in weights])
        if scaled != poly * lam ** (l - 1):
            raise HomogeneityViolation(f"coefficient a^({l})_{k},{m} fails the dilation check")

    generators = []
    for k in range(1, N1 + 1):
        coeffs = [Polynomial(N) for _ in range(N)]
        coeffs[k - 1] = Polynomial.constant(N, 1)
        for l in range(2, r + 1):
            for m in range(1, strata[l - 1] + 1):
                poly = spec.coeffs.get((l, k, m))
                if poly is not None:
                    coeffs[offsets[l - 1] + m - 1] = poly
        generators.append(VectorField(coeffs))

    law = spec.law
    if law is None:
        if r == 1:
            law = AbelianLaw(N)
        elif r == 2:
            law = _step_two_law_from_coeffs(strata, spec.coeffs)
    group = StratifiedGroup(spec, generators, law)

    points = [np.zeros(N)] + list(np.random.default_rng(RANK_SEED).uniform(-1, 1, size=(N_RANK_SAMPLES, N)))
    if max(hoermander_rank(group, p) for p in points) < N:
        raise RankDeficient(f"iterated brackets of {spec.name!r} do not span R^{N}")
    return group


def _step_two_law_from_coeffs(strata, coeffs):
    N1 = strata[0]
    tensor = [dict() for _ in range(strata[1])]
    for (l, k, m), poly in coeffs.items():
        for exps, c in poly.terms.items():
            i = exps.index(1)
            tensor[m - 1][(i, k - 1)] = tensor[m - 1].get((i, k - 1), 0) + c
    assert all(i < N1 for t in tensor for (i, _) in t)
    return StepTwoLaw(strata, tensor)


def dilate(g, lam, x):
    """``delta_lambda(x)``: the stratum-k block of ``x`` scaled by ``lam**k``."""
    if not lam > 0:
        raise NonPositiveLambda(f"dilation factor must be positive, got {lam}")
    if isinstance(x, np.ndarray):
        w = np.asarray(g.weights).reshape((-1,) + (1,) * (x.ndim - 1))
        return x * lam**w
    return [xi * lam**w for xi, w in zip(x, g.weights)]


def group_multiply(g, x, y):
    """``x o y`` for groups with a closed-form law (presets and step <= 2)."""
    if g.law is None:
        raise UnsupportedGroupLaw(f"no explicit group law for {g.name!r} (step {g.step})")
    out = g.law.multiply(list(x), list(y))
    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        return np.array(np.broadcast_arrays(*[np.asarray(o, dtype=float) for o in out]))
    return out


def iterated_brackets(g, depth=None):
    """Generators and iterated brackets ``[X_i1, [X_i2, ...]]`` up to ``depth``."""
    depth = depth or g.step
    layers = [list(g.generators)]
    for _ in range(depth - 1):
        nxt = []
        for X in g.generators:
            for Y in layers[-1]:
                Z = lie_bracket(X, Y)
                if not Z.is_zero():
                    nxt.append(Z)
        layers.append(nxt)
    return [V for layer in layers for V in layer]


def hoermander_rank(g, x, tol=RANK_TOL):
    """Rank of the span of iterated brackets (to depth r) evaluated at ``x``."""
    fields = getattr(g, "_bracket_cache", None)
    if fields is None:
        fields = iterated_brackets(g)
        g._bracket_cache = fields
    M = np.array([V.evaluate(np.asarray(x, dtype=float)) for V in fields])
    return int(np.linalg.matrix_rank(M, tol=tol))


# ---------------------------------------------------------------------------
# presets

def _poly(N, text):
    return ex.to_polynomial(ex.parse_expression(text, n_coords=N), N)


def euclidean(n=3):
    spec = StratifiedGroupSpec(name=f"R{n}", strata=(n,), preset=f"euclidean:{n}")
    return build_group(spec)


def heisenberg(n=1):
    """H^n with ``X_i = d_{x_i} - (y_i/2) d_t``, ``Y_i = d_{y_i} + (x_i/2) d_t``.

    Coordinates are ``(x_1..x_n, y_1..y_n, t)``.
    """
    N = 2 * n + 1
    coeffs = {}
    for i in range(n):
        coeffs[(2, i + 1, 1)] = _poly(N, f"-x{n + i + 1}/2")
        coeffs[(2, n + i + 1, 1)] = _poly(N, f"x{i + 1}/2")
    tensor = [{}]
    for i in range(n):
        tensor[0][(i, n + i)] = Fraction(1, 2)
        tensor[0][(n + i, i)] = Fraction(-1, 2)
    spec = StratifiedGroupSpec(name=f"H{n}", strata=(2 * n, 1), coeffs=coeffs, preset=f"heisenberg:{n}",
                               law=StepTwoLaw((2 * n, 1), tensor))
    return build_group(spec)


def free_step_two(m=3):
    """Free nilpotent group of step 2 on ``m`` generators.

    The second stratum has one coordinate ``t_ij`` per pair ``i < j`` with
    ``[X_i, X_j] = d/dt_ij``.
    """
    pairs = list(combinations(range(m), 2))
    N = m + len(pairs)
    coeffs = {}
    tensor = [dict() for _ in pairs]
    for idx, (i, j) in enumerate(pairs):
        # a_{j,idx} = x_i / 2, a_{i,idx} = -x_j / 2
        coeffs[(2, j + 1, idx + 1)] = _poly(N, f"x{i + 1}/2")
        coeffs[(2, i + 1, idx + 1)] = _poly(N, f"-x{j + 1}/2")
        tensor[idx][(i, j)] = Fraction(1, 2)
        tensor[idx][(j, i)] = Fraction(-1, 2)
    spec = StratifiedGroupSpec(name=f"F2_{m}", strata=(m, len(pairs)), coeffs=coeffs,
                               preset=f"free2:{m}", law=StepTwoLaw((m, len(pairs)), tensor))
    return build_group(spec)


def engel():
    """Engel group, strata [2, 1, 1], exponential coordinates."""
    N = 4
    coeffs = {
        (2, 1, 1): _poly(N, "-x2/2"),
        (2, 2, 1): _poly(N, "x1/2"),
        (3, 1, 1): _poly(N, "-x3/2 - x1*x2/12"),
        (3, 2, 1): _poly(N, "x1^2/12"),
    }
    spec = StratifiedGroupSpec(name="Engel", strata=(2, 1, 1), coeffs=coeffs, preset="engel", law=EngelLaw())
    return build_group(spec)


def preset(name):
    """Look up a preset by id: ``R<n>``, ``H<n>``, ``F2_<m>``, ``Engel`` (also ``euclidean:n`` etc.)."""
    key = name.strip()
    low = key.lower()
    if low == "engel":
        return engel()
    for prefix, builder in (("euclidean:", euclidean), ("heisenberg:", heisenberg), ("free2:", free_step_two)):
        if low.startswith(prefix):
            return builder(int(low[len(prefix):]))
    if low.startswith("f2_"):
        return free_step_two(int(low[3:]))
    if low[:1] == "r" and low[1:].isdigit():
        return euclidean(int(low[1:]))
    if low[:1] == "h" and low[1:].isdigit():
        return heisenberg(int(low[1:]))
    raise GroupSpecError(f"unknown preset {name!r}")


def spec_from_config(cfg):
    """Group from a config mapping: ``{name, strata, preset}`` or ``{name, strata, coeffs: [...]}``.

    Each coefficient entry is ``{k, l, m, polynomial}`` with the polynomial
    written in the expression grammar.
    """
    if isinstance(cfg, str):
        return preset(cfg)
    if "preset" in cfg and cfg["preset"]:
        g = preset(str(cfg["preset"]))
        if "strata" in cfg and list(cfg["strata"]) != list(g.strata):
            raise GroupSpecError(f"strata {cfg['strata']} do not match preset {cfg['preset']}")
        return g
    strata = tuple(int(n) for n in cfg["strata"])
    N = sum(strata)
    coeffs = {}
    for entry in cfg.get("coeffs", []):
        key = (int(entry["l"]), int(entry["k"]), int(entry["m"]))
        coeffs[key] = ex.to_polynomial(ex.parse_expression(str(entry["polynomial"]), n_coords=N), N)
    return build_group(StratifiedGroupSpec(name=str(cfg.get("name", "custom")), strata=strata, coeffs=coeffs))


PRESETS = ("R1", "R2", "R3", "H1", "H2", "F2_3", "Engel")
