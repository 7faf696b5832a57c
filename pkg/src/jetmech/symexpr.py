"""Immutable symbolic expressions over the jet/phase-space coordinate alphabet.

The alphabet is fixed: ``t``, ``q{i}``, ``qt{i}``, ``qtt{i}``, ``p{i}`` and
``p0``.  Constants are kept as exact :class:`fractions.Fraction` values; floats
only appear when an expression is evaluated.

Smart constructors (:func:`add`, :func:`mul`, :func:`power`, :func:`func`) do
cheap canonicalisation (flattening, constant folding, like-term and like-base
collection).  :func:`simplify` additionally expands products of sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Expr", "Const", "NamedConst", "Sym", "Add", "Mul", "Pow", "Func",
    "ExprError", "ParseError", "DomainError", "UnassignedSymbolError",
    "t", "q", "qt", "qtt", "p", "p0", "pi", "const", "as_expr",
    "add", "mul", "power", "func", "sin", "cos", "exp", "log", "sqrt",
    "diff", "total_derivative", "evaluate", "simplify", "substitute",
    "free_symbols", "lambdify", "parse", "point", "check_dimension",
    "is_numerically_zero", "ZERO", "ONE",
]

Number = Union[int, Fraction, float]
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
KINDS = ("t", "q", "qt", "qtt", "p")
EXPAND_LIMIT = 2000


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class DomainError(ExprError, ValueError):
    """A function was evaluated outside its domain."""


class UnassignedSymbolError(ExprError, KeyError):
    def __str__(self):
        return self.args[0]


def _frac(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not expression constants")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ExprError(f"non-finite constant {x!r}")
        return Fraction(repr(x))
    raise TypeError(f"cannot convert {type(x).__name__} to an expression constant")


def _cached_hash(self) -> int:
    h = self.__dict__.get("_hash")
    if h is None:
        h = hash((type(self).__name__,) + tuple(getattr(self, f) for f in self.__dataclass_fields__))
        object.__setattr__(self, "_hash", h)
    return h


class Expr:
    """Base class of expression nodes.  Instances are immutable."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, mul(Const(Fraction(-1)), as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), mul(Const(Fraction(-1)), self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), Fraction(-1)))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, Fraction(-1)))

    def __pow__(self, other):
        return power(self, _frac(other))

    def __neg__(self):
        return mul(Const(Fraction(-1)), self)

    def __pos__(self):
        return self

    def __str__(self):
        return _print(self)

    @cached_property
    def key(self) -> str:
        """Stable string used for canonical ordering."""
        return _print(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: Fraction
    __hash__ = _cached_hash

    def __repr__(self):
        return f"Const({self.value})"


@dataclass(frozen=True, eq=True)
class NamedConst(Expr):
    name: str
    __hash__ = _cached_hash

    @property
    def value(self) -> float:
        return math.pi

    def __repr__(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Sym(Expr):
    kind: str
    index: int = 0
    __hash__ = _cached_hash

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ExprError(f"unknown coordinate kind {self.kind!r}")
        if self.kind == "t":
            if self.index != 0:
                raise ExprError("time carries no index")
        elif self.kind == "p":
            if self.index < 0:
                raise ExprError("momentum index must be >= 0")
        elif self.index < 1:
            raise ExprError(f"{self.kind} index must be >= 1")

    @property
    def name(self) -> str:
        return "t" if self.kind == "t" else f"{self.kind}{self.index}"

    def __repr__(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Add(Expr):
    terms: tuple
    __hash__ = _cached_hash

    def __repr__(self):
        return f"Add{self.terms!r}"


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    factors: tuple
    __hash__ = _cached_hash

    def __repr__(self):
        return f"Mul{self.factors!r}"


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: Fraction
    __hash__ = _cached_hash

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent})"


@dataclass(frozen=True, eq=True)
class Func(Expr):
    name: str
    arg: Expr
    __hash__ = _cached_hash

    def __repr__(self):
        return f"{self.name}({self.arg!r})"


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))
pi = NamedConst("pi")
t = Sym("t")
p0 = Sym("p", 0)


def q(i: int) -> Sym:
    return Sym("q", i)


def qt(i: int) -> Sym:
    return Sym("qt", i)


def qtt(i: int) -> Sym:
    return Sym("qtt", i)


def p(i: int) -> Sym:
    return Sym("p", i)


def const(x: Number) -> Const:
    return Const(_frac(x))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(_frac(x))


# ---------------------------------------------------------------------------
# smart constructors


def _split_coeff(e: Expr) -> tuple[Fraction, Expr]:
    """Split ``e`` as ``c * rest`` with rational ``c``."""
    if isinstance(e, Const):
        return e.value, ONE
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        rest = e.factors[1:]
        return e.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return Fraction(1), e


def add(*args: Expr) -> Expr:
    flat: list[Expr] = []
    for a in args:
        if isinstance(a, Add):
            flat.extend(a.terms)
        else:
            flat.append(a)
    constant = Fraction(0)
    coeffs: dict[Expr, Fraction] = {}
    for a in flat:
        c, rest = _split_coeff(a)
        if rest == ONE:
            constant += c
        else:
            coeffs[rest] = coeffs.get(rest, Fraction(0)) + c
    terms = []
    for rest in sorted(coeffs, key=lambda e: e.key):
        c = coeffs[rest]
        if c == 0:
            continue
        terms.append(rest if c == 1 else mul(Const(c), rest))
    if constant != 0 or not terms:
        terms.insert(0, Const(constant))
    if len(terms) == 1:
        return terms[0]
    return Add(tuple(terms))


def _split_power(e: Expr) -> tuple[Expr, Fraction]:
    if isinstance(e, Pow):
        return e.base, e.exponent
    return e, Fraction(1)


def mul(*args: Expr) -> Expr:
    flat: list[Expr] = []
    for a in args:
        if isinstance(a, Mul):
            flat.extend(a.factors)
        else:
            flat.append(a)
    coeff = Fraction(1)
    exponents: dict[Expr, Fraction] = {}
    for a in flat:
        if isinstance(a, Const):
            coeff *= a.value
            continue
        base, ex = _split_power(a)
        exponents[base] = exponents.get(base, Fraction(0)) + ex
    if coeff == 0:
        return ZERO
    factors = []
    redo = False
    for base in sorted(exponents, key=lambda e: e.key):
        f = power(base, exponents[base])
        if isinstance(f, Const):
            coeff *= f.value
        elif isinstance(f, Mul):
            # power() distributed over a product; bases may now repeat
            factors.extend(f.factors)
            redo = True
        else:
            factors.append(f)
    if redo:
        return mul(Const(coeff), *factors)
    if coeff == 0:
        return ZERO
    if not factors:
        return Const(coeff)
    if coeff == 1 and len(factors) == 1:
        return factors[0]
    factors.sort(key=lambda e: e.key)
    if coeff != 1:
        factors.insert(0, Const(coeff))
    return Mul(tuple(factors))


def _rational_power(base: Fraction, ex: Fraction) -> Fraction | None:
    """Exact ``base**ex`` when it is rational, else None."""
    if ex.denominator == 1:
        if base == 0 and ex < 0:
            return None
        return base ** int(ex)
    if base < 0:
        return None
    num = _exact_root(base.numerator, ex.denominator)
    den = _exact_root(base.denominator, ex.denominator)
    if num is None or den is None:
        return None
    root = Fraction(num, den)
    if root == 0 and ex < 0:
        return None
    return root ** ex.numerator


def _exact_root(n: int, k: int) -> int | None:
    r = round(n ** (1.0 / k))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand**k == n:
            return cand
    return None


def power(base: Expr, ex: Number) -> Expr:
    ex = _frac(ex)
    if ex == 0:
        return ONE
    if ex == 1:
        return base
    if isinstance(base, Const):
        r = _rational_power(base.value, ex)
        if r is not None:
            return Const(r)
        return Pow(base, ex)
    if isinstance(base, Pow) and ex.denominator == 1:
        return power(base.base, base.exponent * ex)
    if isinstance(base, Mul) and ex.denominator == 1:
        return mul(*(power(f, ex) for f in base.factors))
    return Pow(base, ex)


def func(name: str, arg: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ExprError(f"unknown function {name!r}")
    if isinstance(arg, Const):
        v = arg.value
        if name in ("sin",) and v == 0:
            return ZERO
        if name == "cos" and v == 0:
            return ONE
        if name == "exp" and v == 0:
            return ONE
        if name == "log" and v == 1:
            return ZERO
        if name == "sqrt":
            r = _rational_power(v, Fraction(1, 2))
            if r is not None:
                return Const(r)
    return Func(name, arg)


def sin(a) -> Expr:
    return func("sin", as_expr(a))


def cos(a) -> Expr:
    return func("cos", as_expr(a))


def exp(a) -> Expr:
    return func("exp", as_expr(a))


def log(a) -> Expr:
    return func("log", as_expr(a))


def sqrt(a) -> Expr:
    return func("sqrt", as_expr(a))


# ---------------------------------------------------------------------------
# traversal


def _map_children(e: Expr, fn: Callable[[Expr], Expr]) -> Expr:
    if isinstance(e, Add):
        return add(*(fn(a) for a in e.terms))
    if isinstance(e, Mul):
        return mul(*(fn(a) for a in e.factors))
    if isinstance(e, Pow):
        return power(fn(e.base), e.exponent)
    if isinstance(e, Func):
        return func(e.name, fn(e.arg))
    return e


def free_symbols(e: Expr) -> frozenset[Sym]:
    return _free_symbols(e)


@lru_cache(maxsize=65536)
def _free_symbols(e: Expr) -> frozenset[Sym]:
    if isinstance(e, Sym):
        return frozenset((e,))
    if isinstance(e, Add):
        return frozenset().union(*(_free_symbols(a) for a in e.terms))
    if isinstance(e, Mul):
        return frozenset().union(*(_free_symbols(a) for a in e.factors))
    if isinstance(e, Pow):
        return _free_symbols(e.base)
    if isinstance(e, Func):
        return _free_symbols(e.arg)
    return frozenset()


def check_dimension(e: Expr, n: int) -> None:
    """Raise if ``e`` refers to a coordinate index beyond dimension ``n``."""
    for s in free_symbols(e):
        if s.index > n:
            raise ExprError(f"symbol {s.name} exceeds dimension {n}")


def substitute(e: Expr, bindings: Mapping[Sym, Expr | Number]) -> Expr:
    """Simultaneous replacement of symbols."""
    bound = {k: as_expr(v) for k, v in bindings.items()}
    cache: dict[Expr, Expr] = {}

    def go(x: Expr) -> Expr:
        if x in cache:
            return cache[x]
        if isinstance(x, Sym):
            r = bound.get(x, x)
        else:
            r = _map_children(x, go)
        cache[x] = r
        return r

    return go(e)


# ---------------------------------------------------------------------------
# differentiation


@lru_cache(maxsize=65536)
def diff(e: Expr, v: Sym) -> Expr:
    """Partial derivative with every other coordinate held fixed."""
    if not isinstance(v, Sym):
        raise ExprError("can only differentiate with respect to a coordinate symbol")
    if v not in free_symbols(e):
        return ZERO
    if isinstance(e, Sym):
        return ONE
    if isinstance(e, Add):
        return add(*(diff(a, v) for a in e.terms))
    if isinstance(e, Mul):
        fs = e.factors
        terms = []
        for i, f in enumerate(fs):
            d = diff(f, v)
            if d != ZERO:
                terms.append(mul(*fs[:i], d, *fs[i + 1:]))
        return add(*terms)
    if isinstance(e, Pow):
        return mul(Const(e.exponent), power(e.base, e.exponent - 1), diff(e.base, v))
    if isinstance(e, Func):
        a = e.arg
        da = diff(a, v)
        if e.name == "sin":
            outer = cos(a)
        elif e.name == "cos":
            outer = -sin(a)
        elif e.name == "exp":
            outer = e
        elif e.name == "log":
            outer = power(a, -1)
        else:
            outer = mul(Const(Fraction(1, 2)), power(e, -1))
        return mul(outer, da)
    return ZERO


def total_derivative(e: Expr) -> Expr:
    """``d_t e = ∂_t e + Σ q_t^i ∂_i e + Σ q_tt^i ∂^t_i e`` on functions of (t, q, q_t)."""
    syms = free_symbols(e)
    bad = sorted(s.name for s in syms if s.kind in ("p", "qtt"))
    if bad:
        raise ExprError(f"total derivative acts on functions of (t, q, q_t); found {', '.join(bad)}")
    terms = [diff(e, t)]
    for s in syms:
        if s.kind == "q":
            terms.append(mul(qt(s.index), diff(e, s)))
        elif s.kind == "qt":
            terms.append(mul(qtt(s.index), diff(e, s)))
    return add(*terms)


# ---------------------------------------------------------------------------
# simplification


def _expand(e: Expr) -> Expr:
    if isinstance(e, (Const, NamedConst, Sym)):
        return e
    if isinstance(e, Func):
        return func(e.name, _expand(e.arg))
    if isinstance(e, Add):
        return add(*(_expand(a) for a in e.terms))
    if isinstance(e, Pow):
        base = _expand(e.base)
        ex = e.exponent
        if isinstance(base, Add) and ex.denominator == 1 and 1 < ex <= 6:
            if len(base.terms) ** int(ex) <= EXPAND_LIMIT:
                return _expand_product([base] * int(ex))
        return power(base, ex)
    if isinstance(e, Mul):
        return _expand_product([_expand(f) for f in e.factors])
    return e


def _expand_product(factors: Sequence[Expr]) -> Expr:
    sums = [f for f in factors if isinstance(f, Add)]
    others = [f for f in factors if not isinstance(f, Add)]
    size = 1
    for s in sums:
        size *= len(s.terms)
    if not sums or size > EXPAND_LIMIT:
        return mul(*factors)
    acc: list[Expr] = [mul(*others)]
    for s in sums:
        acc = [mul(a, b) for a in acc for b in s.terms]
    return add(*acc)


def _pythagoras(e: Expr) -> Expr:
    """Collapse ``c*R*sin(a)^2 + c*R*cos(a)^2`` into ``c*R`` inside a sum."""
    if not isinstance(e, Add):
        return e
    split = []
    for term in e.terms:
        c, rest = _split_coeff(term)
        fs = rest.factors if isinstance(rest, Mul) else (rest,)
        split.append((c, fs))
    used = [False] * len(split)
    merged = []
    for k, (c, fs) in enumerate(split):
        if used[k]:
            continue
        for pos, f in enumerate(fs):
            if isinstance(f, Pow) and f.exponent == 2 and isinstance(f.base, Func) and f.base.name == "sin":
                partner = Pow(Func("cos", f.base.arg), Fraction(2))
                want = sorted(fs[:pos] + (partner,) + fs[pos + 1:], key=lambda x: x.key)
                match = next((m for m, (c2, fs2) in enumerate(split)
                              if not used[m] and m != k and c2 == c and list(fs2) == want), None)
                if match is not None:
                    used[k] = used[match] = True
                    merged.append(mul(Const(c), *fs[:pos], *fs[pos + 1:]))
                    break
    if not merged:
        return e
    out = merged + [mul(Const(c), *fs) for k, (c, fs) in enumerate(split) if not used[k]]
    return add(*out)


def simplify(e: Expr) -> Expr:
    """Conservative simplification: expansion, constant folding, like terms
    and the identity sin^2 + cos^2 = 1 on matching terms."""
    prev = e
    for _ in range(6):
        cur = _pythagoras(_expand(prev))
        if cur == prev:
            break
        prev = cur
    return prev


# ---------------------------------------------------------------------------
# numeric evaluation


def point(t: float | None = None, q: Iterable[float] = (), qt: Iterable[float] = (),
          qtt: Iterable[float] = (), p: Iterable[float] = (), p0: float | None = None) -> dict:
    """Build a point assignment ``{Sym: float}`` from coordinate vectors."""
    pt: dict[Sym, float] = {}
    if t is not None:
        pt[Sym("t")] = float(t)
    for kind, vals in (("q", q), ("qt", qt), ("qtt", qtt), ("p", p)):
        for i, v in enumerate(vals, start=1):
            pt[Sym(kind, i)] = float(v)
    if p0 is not None:
        pt[Sym("p", 0)] = float(p0)
    return pt


def _check_pow(b, e):
    try:
        r = b ** e
    except ZeroDivisionError:
        raise DomainError(f"division by zero in {b}**{e}") from None
    if isinstance(r, complex):
        raise DomainError(f"negative base {b} raised to non-integer power {e}")
    return r


def _check_log(x):
    if x <= 0:
        raise DomainError(f"log of non-positive value {x}")
    return math.log(x)


def _check_sqrt(x):
    if x < 0:
        raise DomainError(f"sqrt of negative value {x}")
    return math.sqrt(x)


_MATH_ENV = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp, "log": _check_log,
    "sqrt": _check_sqrt, "_pow": _check_pow, "pi": math.pi,
}
_NUMPY_ENV = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
    "_pow": np.power, "pi": math.pi,
}


def _code(e: Expr, names: Mapping[Sym, str]) -> str:
    if isinstance(e, Const):
        v = e.value
        return repr(float(v)) if v.denominator != 1 else f"{v.numerator}.0"
    if isinstance(e, NamedConst):
        return e.name
    if isinstance(e, Sym):
        return names[e]
    if isinstance(e, Add):
        return "(" + " + ".join(_code(a, names) for a in e.terms) + ")"
    if isinstance(e, Mul):
        return "(" + " * ".join(_code(a, names) for a in e.factors) + ")"
    if isinstance(e, Pow):
        ex = e.exponent
        if ex.denominator == 1 and ex > 0:
            return f"({_code(e.base, names)} ** {ex.numerator})"
        return f"_pow({_code(e.base, names)}, {float(ex)!r})"
    if isinstance(e, Func):
        return f"{e.name}({_code(e.arg, names)})"
    raise ExprError(f"cannot compile {e!r}")


def lambdify(exprs: Expr | Sequence[Expr], args: Sequence[Sym], backend: str = "math") -> Callable:
    """Compile expressions into a Python function of positional ``args``.

    With ``backend="numpy"`` the function accepts arrays and always returns
    arrays broadcast to the common argument shape.
    """
    single = isinstance(exprs, Expr)
    seq = [exprs] if single else list(exprs)
    args = list(args)
    missing = set().union(*(free_symbols(e) for e in seq)) - set(args) if seq else set()
    if missing:
        names = ", ".join(sorted(s.name for s in missing))
        raise UnassignedSymbolError(f"unassigned symbol(s): {names}")
    names = {s: f"_a{k}" for k, s in enumerate(args)}
    body = ", ".join(_code(e, names) for e in seq)
    params = ", ".join(names[s] for s in args)
    env = dict(_MATH_ENV if backend == "math" else _NUMPY_ENV)
    if backend == "math":
        src = f"def _f({params}):\n    return ({body},)\n"
        exec(compile(src, "<jetmech-lambdify>", "exec"), env)
        raw = env["_f"]

        def f(*vals):
            try:
                out = raw(*vals)
            except ZeroDivisionError as err:
                raise DomainError(str(err)) from None
            except (ValueError, OverflowError) as err:
                raise DomainError(str(err)) from None
            return out[0] if single else out
    elif backend == "numpy":
        src = f"def _f({params}):\n    return ({body},)\n"
        exec(compile(src, "<jetmech-lambdify>", "exec"), env)
        raw = env["_f"]

        def f(*vals):
            arrs = [np.asarray(v, dtype=float) for v in vals]
            shape = np.broadcast_shapes(*(a.shape for a in arrs)) if arrs else ()
            with np.errstate(all="ignore"):
                out = [np.broadcast_to(np.asarray(r, dtype=float), shape).copy() for r in raw(*arrs)]
            return out[0] if single else out
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return f


def evaluate(e: Expr, pt: Mapping[Sym, float]) -> float:
    """Evaluate at a point; every free symbol must be assigned."""
    syms = sorted(free_symbols(e), key=lambda s: s.key)
    missing = [s.name for s in syms if s not in pt]
    if missing:
        raise UnassignedSymbolError(f"unassigned symbol(s): {', '.join(missing)}")
    fn = _compiled(e, tuple(syms))
    value = fn(*(float(pt[s]) for s in syms))
    if not math.isfinite(value):
        raise DomainError(f"non-finite value {value} evaluating {e}")
    return value


@lru_cache(maxsize=4096)
def _compiled(e: Expr, syms: tuple) -> Callable:
    return lambdify(e, syms)


def is_numerically_zero(e: Expr, points: Iterable[Mapping[Sym, float]], tol: float = 1e-9) -> bool:
    """True when ``e`` evaluates within ``tol`` of zero at every point."""
    for pt in points:
        try:
            if abs(evaluate(e, pt)) > tol:
                return False
        except DomainError:
            continue
    return True


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt_const(v: Fraction) -> tuple[str, int]:
    if v.denominator == 1:
        return (str(v.numerator), _PREC_ATOM if v >= 0 else _PREC_UNARY)
    s = f"{v.numerator}/{v.denominator}"
    return (s, _PREC_MUL if v > 0 else _PREC_UNARY)


def _wrap(s: str, prec: int, need: int) -> str:
    return f"({s})" if prec < need else s


def _fmt(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, (NamedConst, Sym)):
        return (e.name, _PREC_ATOM)
    if isinstance(e, Func):
        return (f"{e.name}({_fmt(e.arg)[0]})", _PREC_ATOM)
    if isinstance(e, Pow):
        bs, bp = _fmt(e.base)
        es, _ = _fmt_const(e.exponent)
        if e.exponent.denominator != 1 or e.exponent < 0:
            es = f"({es})"
        return (f"{_wrap(bs, bp, _PREC_ATOM)}^{es}", _PREC_POW)
    if isinstance(e, Mul):
        fs = list(e.factors)
        sign = ""
        if isinstance(fs[0], Const) and fs[0].value == -1:
            sign = "-"
            fs = fs[1:]
        parts = []
        for k, f in enumerate(fs):
            s, pr = _fmt(f)
            # a leading rational like 3/2 is fine first; elsewhere needs parens
            need = _PREC_MUL if k == 0 else _PREC_POW
            parts.append(_wrap(s, pr, need))
        body = "*".join(parts)
        if sign:
            return (f"-{body}", _PREC_UNARY)
        return (body, _PREC_MUL if len(parts) > 1 else _fmt(fs[0])[1])
    if isinstance(e, Add):
        out = ""
        for k, a in enumerate(e.terms):
            s, pr = _fmt(a)
            if k == 0:
                out = s
            elif s.startswith("-"):
                out += " - " + s[1:]
            else:
                out += " + " + _wrap(s, pr, _PREC_MUL)
        return (out, _PREC_ADD)
    raise ExprError(f"cannot print {e!r}")


def _print(e: Expr) -> str:
    return _fmt(e)[0]


# ---------------------------------------------------------------------------
# parsing


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            yield ("num", text[i:j], i)
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            yield ("id", text[i:j], i)
            i = j
            continue
        if c == "*" and i + 1 < n and text[i + 1] == "*":
            yield ("op", "^", i)
            i += 2
            continue
        if c in "+-*/^()":
            yield ("op", c, i)
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    yield ("end", "", n)


class _Parser:
    def __init__(self, text: str, n: int | None):
        self.tokens = list(_tokenize(text))
        self.pos = 0
        self.n = n

    @property
    def tok(self):
        return self.tokens[self.pos]

    def eat(self, kind, value=None):
        k, v, at = self.tok
        if k != kind or (value is not None and v != value):
            want = value or kind
            got = v or "end of input"
            raise ParseError(f"expected {want!r}, got {got!r}", at)
        self.pos += 1
        return v

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok[0] != "end":
            raise ParseError(f"unexpected token {self.tok[1]!r}", self.tok[2])
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok[:2] in (("op", "+"), ("op", "-")):
            op = self.eat("op")
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok[:2] in (("op", "*"), ("op", "/")):
            op = self.eat("op")
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self) -> Expr:
        if self.tok[:2] == ("op", "-"):
            self.eat("op")
            return -self.unary()
        if self.tok[:2] == ("op", "+"):
            self.eat("op")
            return self.unary()
        return self.pow()

    def pow(self) -> Expr:
        base = self.atom()
        if self.tok[:2] == ("op", "^"):
            at = self.tok[2]
            self.eat("op")
            ex = simplify(self.unary())
            if not isinstance(ex, Const):
                raise ParseError("exponent must be a rational constant", at)
            return power(base, ex.value)
        return base

    def atom(self) -> Expr:
        kind, v, at = self.tok
        if kind == "num":
            self.pos += 1
            try:
                return Const(Fraction(v))
            except ValueError:
                raise ParseError(f"malformed number {v!r}", at) from None
        if kind == "op" and v == "(":
            self.eat("op")
            e = self.expr()
            self.eat("op", ")")
            return e
        if kind == "id":
            self.pos += 1
            if v in FUNCTIONS:
                self.eat("op", "(")
                a = self.expr()
                self.eat("op", ")")
                return func(v, a)
            if v == "pi":
                return pi
            return self.symbol(v, at)
        raise ParseError(f"unexpected token {v or 'end of input'!r}", at)

    def symbol(self, name: str, at: int) -> Sym:
        if name == "t":
            return t
        for kind in ("qtt", "qt", "q", "p"):
            if name.startswith(kind) and name[len(kind):].isdigit():
                idx = int(name[len(kind):])
                if kind != "p" and idx == 0:
                    raise ParseError(f"index of {name!r} must start at 1", at)
                if self.n is not None and idx > self.n:
                    raise ParseError(f"{name!r} exceeds dimension {self.n}", at)
                return Sym(kind, idx)
        raise ParseError(f"unknown identifier {name!r}", at)


def parse(text: str, n: int | None = None) -> Expr:
    """Parse the infix grammar; ``n`` bounds coordinate indices when given."""
    return _Parser(text, n).parse()
