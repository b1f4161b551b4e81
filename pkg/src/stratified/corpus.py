"""Seeded test corpora for the identity checks.

Every case is built from a fixed seed, so the corpora are reproducible
and can be regenerated instead of being stored.  Expressions are emitted
as text in the expression grammar, which keeps the cases readable in
reports.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import expressions as ex
from .geometry import Box, bump
from .groups import preset
from .identities import AdmissibleNonlinearity

CORPUS_SEED = 20240611


@dataclass
class Case:
    """One corpus entry: a group, a box and named expressions."""

    group: str
    lo: tuple
    hi: tuple
    p: float = 2.0
    exprs: dict = field(default_factory=dict)
    f: str = None
    seed: int = 0

    def box(self, subdiv=1):
        return Box(self.lo, self.hi, subdiv)

    def config(self):
        out = {"group": self.group, "domain": {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)},
               "p": self.p, "seed": self.seed}
        out.update(self.exprs)
        if self.f is not None:
            out["f"] = self.f
        return out


def _frac(v):
    return str(Fraction(v).limit_denominator(64))


def random_polynomial(N, degree, rng, n_terms=5, scale=1.0):
    """Text of a polynomial in ``x1..xN`` with at most ``n_terms`` monomials of degree ``<= degree``."""
    terms = []
    for _ in range(n_terms):
        total = int(rng.integers(0, degree + 1))
        powers = np.zeros(N, dtype=int)
        for _ in range(total):
            powers[rng.integers(0, N)] += 1
        c = Fraction(int(rng.integers(-8, 9)), 8) * Fraction(scale).limit_denominator(64)
        if c == 0:
            continue
        mono = "*".join(f"x{i + 1}^{k}" if k > 1 else f"x{i + 1}" for i, k in enumerate(powers) if k)
        terms.append(f"({c})" + (f"*{mono}" if mono else ""))
    return " + ".join(terms) if terms else "0"


def random_box(N, rng, lo_range=(-1.0, 0.0), width=(0.5, 1.5)):
    """A box with corners on the 1/4 lattice."""
    lo = np.round(rng.uniform(*lo_range, N) * 4) / 4
    hi = lo + np.round(rng.uniform(*width, N) * 4) / 4
    return tuple(float(a) for a in lo), tuple(float(b) for b in hi)


def divergence_corpus(n_cases=25, seed=CORPUS_SEED, groups=("R3", "H1", "Engel"), max_degree=6):
    """Field sets ``(f_1, ..., f_{N1})`` of degree ``<= max_degree`` over the given presets."""
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n_cases):
        name = groups[i % len(groups)]
        g = preset(name)
        degree = 1 + i % max_degree
        lo, hi = random_box(g.N, rng)
        fields = [random_polynomial(g.N, degree, rng) for _ in range(g.N1)]
        cases.append(Case(name, lo, hi, 2.0, {"fields": fields, "degree": degree}, seed=seed + i))
    return cases


def green_corpus(n_cases=6, seed=CORPUS_SEED + 1, group="H1", degree=3):
    """Pairs ``(u, v)`` of polynomials for the p = 2 Green identities."""
    rng = np.random.default_rng(seed)
    g = preset(group)
    cases = []
    for i in range(n_cases):
        lo, hi = random_box(g.N, rng)
        u = random_polynomial(g.N, degree, rng)
        v = random_polynomial(g.N, degree, rng)
        cases.append(Case(group, lo, hi, 2.0, {"u": u, "v": v}, seed=seed + i))
    return cases


def green_nonlinear_corpus():
    """H^1 cases for p in {1.5, 3} whose horizontal gradient stays away from zero."""
    lo, hi = (0.0, 0.0, 0.0), (1.0, 1.0, 1.0)
    cases = []
    for p in (1.5, 3.0):
        cases.append(Case("H1", lo, hi, p, {"u": "x1 + x1^2/2 + x2*x3/4", "v": "1 + x2^2 - x3"}))
        cases.append(Case("H1", lo, hi, p, {"u": "2*x2 + x1*x2/2 + x3", "v": "x1*x3 + x2"}))
    return cases


# admissible nonlinearities: (p - 1) f^((p-2)/(p-1)) <= f'
_NONLINEARITIES = {
    1.5: ["t^(1/2)", "2*t^(1/2)", "t^(1/2) + t"],
    2.0: ["t", "t + 1", "2*t + t^2"],
    2.5: ["t^(3/2)", "(t + 1)^(3/2)", "2*t^(3/2)"],
    3.0: ["t^2", "(t + 1)^2", "t^2 + t^3"],
}


def picone_corpus(seed=CORPUS_SEED + 2):
    """Twelve ``(u, v, f, p)`` combinations on H^1 and R^3 with ``v > 0`` on the box."""
    rng = np.random.default_rng(seed)
    cases = []
    for i, (p, fs) in enumerate(sorted(_NONLINEARITIES.items())):
        for j, f in enumerate(fs):
            group = "H1" if (i + j) % 2 == 0 else "R3"
            lo, hi = (-1.0, -1.0, -1.0), (1.0, 1.0, 1.0)
            u = random_polynomial(3, 3, rng)
            # |v - 2| <= 3/4 on [-1, 1]^3, with a nonvanishing horizontal gradient
            v = f"2 + x1/2 + ({random_polynomial(3, 2, rng, n_terms=2, scale=Fraction(1, 8))})"
            cases.append(Case(group, lo, hi, p, {"u": u, "v": v}, f=f, seed=seed + len(cases)))
    return cases


def hardy_corpus(seed=CORPUS_SEED + 3):
    """Ten Hardy-type cases: ``u`` is multiplied by the box bump, ``v > 0``."""
    rng = np.random.default_rng(seed)
    cases = []
    ps = [2.0, 2.0, 2.0, 2.5, 2.5, 3.0, 3.0, 3.0, 2.0, 3.0]
    for i, p in enumerate(ps):
        group = "H1" if i % 2 == 0 else "R3"
        lo, hi = random_box(3, rng)
        u = random_polynomial(3, 2, rng, n_terms=3)
        v = f"3 + ({random_polynomial(3, 2, rng, n_terms=3, scale=Fraction(1, 4))})"
        f = _NONLINEARITIES[p][i % 3]
        cases.append(Case(group, lo, hi, p, {"u": u, "v": v}, f=f, seed=seed + i))
    return cases


def diaz_saa_corpus(seed=CORPUS_SEED + 4):
    """Ten Diaz-Saa cases ``u_i = 1 + bump * q_i`` with ``|q_i| <= 3/4`` on the box."""
    rng = np.random.default_rng(seed)
    cases = []
    ps = [2.0, 2.0, 2.0, 2.5, 2.5, 3.0, 3.0, 4.0, 2.0, 3.0]
    for i, p in enumerate(ps):
        group = "H1" if i % 2 == 0 else "R3"
        lo, hi = random_box(3, rng, lo_range=(-1.0, -0.5), width=(0.5, 1.0))
        q1 = random_polynomial(3, 2, rng, n_terms=3, scale=Fraction(1, 4))
        q2 = random_polynomial(3, 2, rng, n_terms=3, scale=Fraction(1, 4))
        cases.append(Case(group, lo, hi, p, {"q1": q1, "q2": q2}, seed=seed + i))
    return cases


def diaz_saa_profiles(case):
    """Symbolic ``(u1, u2)`` for a Diaz-Saa corpus case."""
    b = bump(case.box())
    N = len(case.lo)
    out = []
    for key in ("q1", "q2"):
        q = ex.parse_expression(case.exprs[key], n_coords=N)
        out.append(ex.add(ex.ONE, ex.mul(b, q)))
    return tuple(out)


def nonlinearity(case):
    return AdmissibleNonlinearity(case.f, case.p)
