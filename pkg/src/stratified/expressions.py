"""Scalar-field expressions: parsing, printing, symbolic differentiation, evaluation.

Grammar (whitespace insignificant)::

    expr     := term (('+' | '-') term)*
    term     := '-' term | factor (('*' | '/') factor)*
    factor   := base ('^' exponent)?
    exponent := '-' exponent | base ('^' exponent)?
    base     := number | name | func '(' expr ')' | 'pow' '(' expr ',' expr ')' | '(' expr ')'

Coordinates are named ``x1 .. xN``; the names ``rho`` (reaction argument)
and ``t`` (one-variable nonlinearities) are also accepted.  The second
argument of ``pow`` must reduce to a rational constant.

Expressions are immutable trees.  The parser builds them verbatim so that
printing and reparsing returns an equal tree; everything else (derivatives,
substitution, arithmetic operators) goes through simplifying constructors
that fold constants and drop zero and unit terms.
"""

from dataclasses import dataclass
from fractions import Fraction
import re

import numpy as np

from .errors import EvalError, NonDifferentiable, ParseError, UnknownCoordinate

FUNCTIONS = ("abs", "sqrt", "exp", "log", "sin", "cos", "sign")
EXTRA_NAMES = ("rho", "t")


class Expr:
    """Base node.  Supports ``+ - * / **`` with other nodes and numbers."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True, repr=True)
class Num(Expr):
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr


ZERO = Num(0)
ONE = Num(1)


def to_fraction(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    return Fraction(repr(float(value)))


def as_expr(value):
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse_expression(value)
    return Num(to_fraction(value))


def coordinate(i):
    """Expression for the 0-based coordinate ``i`` (named ``x{i+1}``)."""
    return Var(f"x{i + 1}")


# ---------------------------------------------------------------------------
# simplifying constructors

def _is_num(e, value=None):
    return isinstance(e, Num) and (value is None or e.value == value)


def add(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    if _is_num(a, 0):
        return b
    if _is_num(b, 0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    if _is_num(b) and b.value < 0:
        return sub(a, Num(-b.value))
    return Add(a, b)


def sub(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    if _is_num(b, 0):
        return a
    if _is_num(a, 0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    if _is_num(b) and b.value < 0:
        return add(a, Num(-b.value))
    return Sub(a, b)


def neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    if _is_num(a, 0) or _is_num(b, 0):
        return ZERO
    if _is_num(a, 1):
        return b
    if _is_num(b, 1):
        return a
    if _is_num(a, -1):
        return neg(b)
    if _is_num(b, -1):
        return neg(a)
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    if _is_num(b):
        a, b = b, a
    if _is_num(a) and a.value < 0:
        return neg(mul(Num(-a.value), b))
    if _is_num(a) and isinstance(b, Mul) and _is_num(b.left):
        return mul(Num(a.value * b.left.value), b.right)
    return Mul(a, b)


def div(a, b):
    if _is_num(b, 0):
        raise EvalError("division by the constant zero")
    if _is_num(a) and _is_num(b):
        return Num(a.value / b.value)
    if _is_num(a, 0):
        return ZERO
    if _is_num(b, 1):
        return a
    if _is_num(b):
        return mul(Num(1 / b.value), a)
    if isinstance(a, Neg):
        return neg(div(a.arg, b))
    return Div(a, b)


def power(b, e):
    if _is_num(e, 0):
        return ONE
    if _is_num(e, 1):
        return b
    if _is_num(b) and _is_num(e) and e.value.denominator == 1:
        if b.value == 0 and e.value < 0:
            raise EvalError("zero raised to a negative power")
        return Num(b.value ** int(e.value))
    if _is_num(b, 1):
        return ONE
    return Pow(b, e)


def func(name, a):
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if _is_num(a):
        v = a.value
        if name == "abs":
            return Num(abs(v))
        if name == "sign" and v != 0:
            return Num(1 if v > 0 else -1)
        if name == "sqrt" and v >= 0:
            r = Fraction(int(round(float(v) ** 0.5)))
            if r * r == v:
                return Num(r)
        if name in ("exp", "sin") and v == 0:
            return ZERO if name == "sin" else ONE
        if name == "cos" and v == 0:
            return ONE
        if name == "log" and v == 1:
            return ZERO
    return Func(name, a)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)

_BASE_START = {"number", "name", "function", "'('"}


class _Parser:
    def __init__(self, text, n_coords, extra_names):
        self.text = text
        self.n_coords = n_coords
        self.extra = set(extra_names)
        self.tokens = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character {text[pos]!r}", pos, _BASE_START | {"operator"})
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.end = len(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", self.end)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos, {f"'{op}'"})
        self.take()

    def parse(self):
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected token {val!r}", pos, {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                e = Add(e, rhs) if val == "+" else Sub(e, rhs)
            else:
                return e

    def term(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.term())
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.factor()
                e = Mul(e, rhs) if val == "*" else Div(e, rhs)
            else:
                return e

    def factor(self):
        b = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            e = self.exponent()
            try:
                e = Num(exact_value(e))
            except (ValueError, ZeroDivisionError, TypeError):
                pass
            return Pow(b, e)
        return b

    def exponent(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.exponent())
        return self.factor()

    def base(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(Fraction(val))
        if kind == "name":
            nxt = self.peek()
            if val == "pow":
                self.expect_op("(")
                b = self.expr()
                self.expect_op(",")
                epos = self.peek()[2]
                e = self.expr()
                self.expect_op(")")
                try:
                    q = exact_value(e)
                except (ValueError, ZeroDivisionError):
                    raise ParseError("pow exponent must be a rational constant", epos, {"number"}) from None
                return Pow(b, Num(q))
            if val in FUNCTIONS:
                self.expect_op("(")
                a = self.expr()
                self.expect_op(")")
                return Func(val, a)
            if nxt[0] == "op" and nxt[1] == "(":
                raise UnknownCoordinate(f"unknown function {val!r} at offset {pos}")
            return self.variable(val, pos)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        what = "end of input" if kind == "eof" else f"token {val!r}"
        raise ParseError(f"unexpected {what}", pos, _BASE_START)

    def variable(self, name, pos):
        m = re.fullmatch(r"x(\d+)", name)
        if m:
            k = int(m.group(1))
            if k < 1 or (self.n_coords is not None and k > self.n_coords):
                raise UnknownCoordinate(f"coordinate {name} at offset {pos} is outside x1..x{self.n_coords}")
            return Var(name)
        if name in self.extra:
            return Var(name)
        raise UnknownCoordinate(f"unknown name {name!r} at offset {pos}")


def parse_expression(text, n_coords=None, extra_names=EXTRA_NAMES):
    """Parse ``text`` into an expression tree.

    Parameters
    ----------
    text : str
    n_coords : int, optional
        When given, coordinates beyond ``x{n_coords}`` raise UnknownCoordinate.
    extra_names : iterable of str
        Non-coordinate variable names that are accepted.
    """
    return _Parser(text, n_coords, extra_names).parse()


def exact_value(e):
    """Exact rational value of a constant expression; ValueError otherwise."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Neg):
        return -exact_value(e.arg)
    if isinstance(e, Add):
        return exact_value(e.left) + exact_value(e.right)
    if isinstance(e, Sub):
        return exact_value(e.left) - exact_value(e.right)
    if isinstance(e, Mul):
        return exact_value(e.left) * exact_value(e.right)
    if isinstance(e, Div):
        return exact_value(e.left) / exact_value(e.right)
    if isinstance(e, Pow):
        q = exact_value(e.exponent)
        if q.denominator != 1:
            raise ValueError("irrational power")
        return exact_value(e.base) ** int(q)
    raise ValueError("not a constant")


# ---------------------------------------------------------------------------
# printing

def _num_str(v):
    """Exact literal for a rational: integer, terminating decimal, or p/q."""
    if v.denominator == 1:
        return str(v.numerator)
    d, twos, fives = v.denominator, 0, 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d == 1:
        k = max(twos, fives)
        digits = str(abs(v.numerator * 10**k // v.denominator)).rjust(k + 1, "0")
        sign = "-" if v < 0 else ""
        return f"{sign}{digits[:-k]}.{digits[-k:]}"
    return f"{v.numerator}/{v.denominator}"


def _atom(e):
    return isinstance(e, (Var, Func)) or (isinstance(e, Num) and e.value >= 0 and "/" not in _num_str(e.value)) or (
        isinstance(e, Pow) and _is_num(e.exponent) and (e.exponent.value.denominator != 1 or e.exponent.value < 0)
    )


def to_string(e):
    if isinstance(e, Num):
        s = _num_str(e.value)
        return s if e.value >= 0 and "/" not in s else f"({s})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        if isinstance(e.arg, (Add, Sub)):
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, (Add, Sub)):
        op = " + " if isinstance(e, Add) else " - "
        right = to_string(e.right)
        if isinstance(e.right, (Add, Sub)):
            right = f"({right})"
        return to_string(e.left) + op + right
    if isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        left = to_string(e.left)
        if isinstance(e.left, (Add, Sub, Neg)):
            left = f"({left})"
        right = to_string(e.right)
        if isinstance(e.right, (Add, Sub, Neg, Mul, Div)):
            right = f"({right})"
        return left + op + right
    if isinstance(e, Pow):
        if _is_num(e.exponent) and (e.exponent.value.denominator != 1 or e.exponent.value < 0):
            return f"pow({to_string(e.base)}, {_rational_str(e.exponent.value)})"
        base = to_string(e.base)
        if not _atom(e.base):
            base = f"({base})"
        return base + "^" + _exponent_str(e.exponent)
    raise TypeError(f"not an expression: {e!r}")


def _rational_str(v):
    return ("-" if v < 0 else "") + _num_str(abs(v))


def _exponent_str(e):
    if isinstance(e, Neg):
        return "-" + _exponent_str(e.arg)
    if isinstance(e, Pow) or _atom(e):
        return to_string(e)
    return f"({to_string(e)})"


# ---------------------------------------------------------------------------
# structure

def free_variables(e):
    out = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            out.add(n.name)
        elif isinstance(n, (Add, Sub, Mul, Div)):
            stack += [n.left, n.right]
        elif isinstance(n, Pow):
            stack += [n.base, n.exponent]
        elif isinstance(n, (Neg, Func)):
            stack.append(n.arg)
    return out


def max_coordinate(e):
    idx = [int(n[1:]) for n in free_variables(e) if re.fullmatch(r"x\d+", n)]
    return max(idx, default=0)


def substitute(e, mapping):
    """Replace variables by expressions (``mapping``: name -> Expr or number)."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    memo = {}

    def go(n):
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Num):
            out = n
        elif isinstance(n, Var):
            out = mapping.get(n.name, n)
        elif isinstance(n, Add):
            out = add(go(n.left), go(n.right))
        elif isinstance(n, Sub):
            out = sub(go(n.left), go(n.right))
        elif isinstance(n, Mul):
            out = mul(go(n.left), go(n.right))
        elif isinstance(n, Div):
            out = div(go(n.left), go(n.right))
        elif isinstance(n, Pow):
            out = power(go(n.base), go(n.exponent))
        elif isinstance(n, Neg):
            out = neg(go(n.arg))
        elif isinstance(n, Func):
            out = func(n.name, go(n.arg))
        else:
            raise TypeError(n)
        memo[key] = out
        return out

    return go(e)


def diff(e, name):
    """Symbolic partial derivative of ``e`` with respect to variable ``name``."""
    memo = {}

    def d(n):
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Num):
            out = ZERO
        elif isinstance(n, Var):
            out = ONE if n.name == name else ZERO
        elif isinstance(n, Add):
            out = add(d(n.left), d(n.right))
        elif isinstance(n, Sub):
            out = sub(d(n.left), d(n.right))
        elif isinstance(n, Neg):
            out = neg(d(n.arg))
        elif isinstance(n, Mul):
            out = add(mul(d(n.left), n.right), mul(n.left, d(n.right)))
        elif isinstance(n, Div):
            da, db = d(n.left), d(n.right)
            out = sub(div(da, n.right), div(mul(n.left, db), power(n.right, Num(2))))
        elif isinstance(n, Pow):
            out = _diff_pow(n, d)
        elif isinstance(n, Func):
            out = _diff_func(n, d(n.arg))
        else:
            raise TypeError(n)
        memo[key] = out
        return out

    return d(e)


def _diff_pow(n, d):
    db = d(n.base)
    if isinstance(n.exponent, Num):
        q = n.exponent.value
        if _is_num(db, 0):
            return ZERO
        return mul(mul(Num(q), power(n.base, Num(q - 1))), db)
    de = d(n.exponent)
    # b^e (e' log b + e b'/b)
    inner = add(mul(de, func("log", n.base)), div(mul(n.exponent, db), n.base))
    return mul(n, inner)


def _diff_func(n, da):
    if _is_num(da, 0):
        return ZERO
    a = n.arg
    name = n.name
    if name == "abs":
        return mul(func("sign", a), da)
    if name == "sign":
        # zero away from the kink; evaluating sign() still raises at it
        return Sub(Func("sign", a), Func("sign", a))
    if name == "sqrt":
        return div(da, mul(Num(2), n))
    if name == "exp":
        return mul(n, da)
    if name == "log":
        return div(da, a)
    if name == "sin":
        return mul(func("cos", a), da)
    if name == "cos":
        return neg(mul(func("sin", a), da))
    raise TypeError(name)


def gradient(e, names):
    return [diff(e, nm) for nm in names]


def tree_size(e):
    seen = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        if isinstance(n, (Add, Sub, Mul, Div)):
            stack += [n.left, n.right]
        elif isinstance(n, Pow):
            stack += [n.base, n.exponent]
        elif isinstance(n, (Neg, Func)):
            stack.append(n.arg)
    return len(seen)


# ---------------------------------------------------------------------------
# numeric evaluation

def evaluate(e, env):
    """Evaluate ``e`` with ``env`` mapping variable names to scalars or arrays.

    Raises EvalError on any domain violation (log of a nonpositive number,
    division by zero, negative base with fractional exponent, ...) and
    NonDifferentiable when ``sign`` is evaluated at zero.
    """
    memo = {}

    def ev(n):
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Num):
            out = float(n.value)
        elif isinstance(n, Var):
            try:
                out = env[n.name]
            except KeyError:
                raise UnknownCoordinate(f"no value supplied for {n.name}") from None
        elif isinstance(n, Add):
            out = ev(n.left) + ev(n.right)
        elif isinstance(n, Sub):
            out = ev(n.left) - ev(n.right)
        elif isinstance(n, Mul):
            out = ev(n.left) * ev(n.right)
        elif isinstance(n, Neg):
            out = -ev(n.arg)
        elif isinstance(n, Div):
            den = ev(n.right)
            if np.any(den == 0):
                raise EvalError(f"division by zero in {to_string(n)}")
            out = ev(n.left) / den
        elif isinstance(n, Pow):
            out = _eval_pow(n, ev)
        elif isinstance(n, Func):
            out = _eval_func(n.name, ev(n.arg))
        else:
            raise TypeError(n)
        memo[key] = out
        return out

    with np.errstate(all="ignore"):
        value = ev(e)
    if not np.all(np.isfinite(value)):
        raise EvalError(f"non-finite value of {to_string(e)[:80]}")
    return value


def _eval_pow(n, ev):
    b = ev(n.base)
    if isinstance(n.exponent, Num):
        q = n.exponent.value
        if q.denominator == 1:
            if q < 0 and np.any(b == 0):
                raise EvalError("zero raised to a negative power")
            k = int(q)
            if k >= 0:
                return b**k
            return 1.0 / b ** (-k)
        if np.any(b < 0):
            raise EvalError("negative base with fractional exponent")
        if q < 0 and np.any(b == 0):
            raise EvalError("zero raised to a negative power")
        return np.power(b, float(q))
    x = ev(n.exponent)
    if np.any(b <= 0):
        raise EvalError("variable exponent needs a positive base")
    return np.power(b, x)


def _eval_func(name, a):
    if name == "abs":
        return np.abs(a)
    if name == "sign":
        if np.any(a == 0):
            raise NonDifferentiable("derivative of abs evaluated at its kink")
        return np.sign(a)
    if name == "sqrt":
        if np.any(a < 0):
            raise EvalError("sqrt of a negative number")
        return np.sqrt(a)
    if name == "exp":
        return np.exp(a)
    if name == "log":
        if np.any(a <= 0):
            raise EvalError("log of a nonpositive number")
        return np.log(a)
    if name == "sin":
        return np.sin(a)
    if name == "cos":
        return np.cos(a)
    raise TypeError(name)


def coordinate_env(x, extra=None):
    """Build an evaluation environment from a point array of shape (N,) or (N, M)."""
    x = np.asarray(x, dtype=float)
    env = {f"x{i + 1}": x[i] for i in range(x.shape[0])}
    if extra:
        env.update(extra)
    return env


def evaluate_at(e, x, **extra):
    """Evaluate at point(s) ``x`` of shape (N,) or (N, M); returns scalar or (M,) array."""
    x = np.asarray(x, dtype=float)
    value = evaluate(e, coordinate_env(x, extra))
    target = x.shape[1:]
    return np.broadcast_to(np.asarray(value, dtype=float), target).copy() if target else float(value)


# ---------------------------------------------------------------------------
# polynomial bridge

def to_polynomial(e, nvars):
    """Convert a polynomial expression in ``x1..x{nvars}`` to an exact Polynomial."""
    from .polynomial import Polynomial

    def go(n):
        if isinstance(n, Num):
            return Polynomial.constant(nvars, n.value)
        if isinstance(n, Var):
            m = re.fullmatch(r"x(\d+)", n.name)
            if not m or not 1 <= int(m.group(1)) <= nvars:
                raise UnknownCoordinate(f"{n.name} is not one of x1..x{nvars}")
            return Polynomial.variable(nvars, int(m.group(1)) - 1)
        if isinstance(n, Add):
            return go(n.left) + go(n.right)
        if isinstance(n, Sub):
            return go(n.left) - go(n.right)
        if isinstance(n, Mul):
            return go(n.left) * go(n.right)
        if isinstance(n, Neg):
            return -go(n.arg)
        if isinstance(n, Div):
            try:
                c = exact_value(n.right)
            except ValueError:
                raise ValueError(f"{to_string(n)} is not a polynomial") from None
            return go(n.left) * (1 / c)
        if isinstance(n, Pow):
            try:
                q = exact_value(n.exponent)
            except ValueError:
                q = None
            if q is None or q.denominator != 1 or q < 0:
                raise ValueError(f"{to_string(n)} is not a polynomial")
            return go(n.base) ** int(q)
        raise ValueError(f"{to_string(n)} is not a polynomial")

    return go(e)


def from_polynomial(poly):
    """Expression equal to ``poly`` (variables named x1..xN)."""
    out = ZERO
    for exps in sorted(poly.terms):
        term = Num(poly.terms[exps])
        for i, k in enumerate(exps):
            if k:
                term = mul(term, power(coordinate(i), Num(k)))
        out = add(out, term)
    return out
