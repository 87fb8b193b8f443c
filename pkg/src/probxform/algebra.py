"""Canonical forms for real-valued terms.

A term is represented as a :class:`Poly`: a finite sum of rational
coefficients times monomials, where a monomial is a product of *atoms* raised
to rational exponents.  Atoms are variables, ``pi``, prime radicals, sums that
cannot be distributed further (under a negative or fractional power), ``exp``
and ``log`` of polys, ``gamma`` of polys, indicator functions of comparisons,
and opaque terms (applications, residual integrals, projections).

The representation is normalised so that equal inputs built in different ways
tend to collapse to the same value; this drives cancellation in acceptance
ratios and the Gaussian/Gamma/Beta closed forms used by the simplifier.

Rewrites that are only valid under positivity (splitting fractional powers
over products, ``log`` of products, ``exp(k*log a) = a^k``) consult the
current :class:`Facts`, installed with :func:`assuming`.

Integer-exponent cancellation is unconditional: ``a/a`` becomes 1 even where
``a`` could be zero.  An indicator only keeps the sign of its exponent, so
``[c]^2 = [c]`` and ``[c] / [c] = 1``.  These only differ from the original
term where it divides by zero.
"""

from __future__ import annotations

import contextvars
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
import weakref
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable

from .ir import (
    Add, And, App, BoolLit, Const, Div, Equal, Exp, Expr, Fst, GammaFn, If, Int, Lam, Less,
    Lit, Log, Mul, Name, Neg, Not, Pow, Snd, Sqrt, Sub, Sum, Var, free_vars,
)

Q = Fraction
ZERO_Q, ONE_Q = Q(0), Q(1)
MAX_TERMS = 3000


class TooBig(Exception):
    """Raised when an expansion would exceed ``MAX_TERMS`` terms."""


class NotArithmetic(Exception):
    pass


# -- atoms ------------------------------------------------------------------

class _Interned(type):
    """Atoms are hash-consed, so equal atoms are the same object."""

    def __call__(cls, *args):
        obj = super().__call__(*args)
        k = (cls, obj.key)
        found = _ATOMS.get(k)
        if found is None:
            obj._h = hash(k)
            _ATOMS[k] = found = obj
        return found


_ATOMS: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()


class Atom(metaclass=_Interned):
    __slots__ = ("_h", "_expr", "__weakref__")
    key: tuple

    def __lt__(self, other):
        return self.key < other.key

    def __eq__(self, other):
        return self is other

    def __hash__(self):
        return self._h

    def __repr__(self):
        return f"{type(self).__name__}{self.key[1:]}"


class VarA(Atom):
    __slots__ = ("name", "key")

    def __init__(self, name: Name):
        self.name = name
        self.key = (0, name.text, name.uid)


class PiA(Atom):
    __slots__ = ("key",)

    def __init__(self):
        self.key = (1,)


class RadA(Atom):
    """A positive integer base (usually prime) under a fractional power."""
    __slots__ = ("n", "key")

    def __init__(self, n: int):
        self.n = n
        self.key = (2, n)


class OpaqueA(Atom):
    __slots__ = ("expr", "key", "_fv")

    def __init__(self, expr: Expr):
        self.expr = expr
        self.key = (3, alpha_key(expr))
        self._fv = free_vars(expr)


class _PolyAtom(Atom):
    __slots__ = ("poly", "key")
    RANK = -1

    def __init__(self, poly: "Poly"):
        self.poly = poly
        self.key = (self.RANK, poly.key)


class SumA(_PolyAtom):
    """A normalised multi-term poly kept as a unit (under a power < 1 or < 0)."""
    __slots__ = ()
    RANK = 4


class BaseA(_PolyAtom):
    """A poly under a fractional power that could not be split into factors."""
    __slots__ = ()
    RANK = 5


class LogA(_PolyAtom):
    __slots__ = ()
    RANK = 6


class GammaA(_PolyAtom):
    __slots__ = ()
    RANK = 7


class ExpA(_PolyAtom):
    __slots__ = ()
    RANK = 9


class IndA(Atom):
    """Indicator of ``0 < poly`` (kind "lt") or ``poly == 0`` (kind "eq");
    ``neg`` negates the condition."""
    __slots__ = ("kind", "poly", "neg", "key", "_cmp")

    def __init__(self, kind: str, poly: "Poly", neg: bool):
        self.kind, self.poly, self.neg = kind, poly, neg
        self.key = (8, kind, neg, poly.key)

    def negate(self) -> "IndA":
        return IndA(self.kind, self.poly, not self.neg)


def atom_fv(a: Atom) -> frozenset:
    if isinstance(a, VarA):
        return frozenset((a.name,))
    if isinstance(a, OpaqueA):
        return a._fv
    if isinstance(a, (_PolyAtom, IndA)):
        return a.poly.fv
    return frozenset()


def alpha_key(e: Expr, env: dict | None = None):
    """Structural key of ``e`` invariant under bound-variable renaming."""
    from .ir import BINDERS, _EXPR_FIELDS, Categorical, Superpose, BoolLit as _B, UnitLit
    env = env or {}
    t = type(e).__name__
    if isinstance(e, Var):
        if e.name in env:
            return (t, "#" + str(env[e.name]))
        return (t, f"{e.name.text}\x00{e.name.uid}")
    if isinstance(e, Lit):
        return (t, str(e.value))
    if isinstance(e, Const):
        return (t, e.name)
    if isinstance(e, _B):
        return (t, str(e.value))
    if isinstance(e, UnitLit):
        return (t,)
    if isinstance(e, (Categorical, Superpose)):
        return (t,) + tuple((alpha_key(w, env), alpha_key(v, env)) for w, v in e.pairs)
    if type(e) in BINDERS:
        inner = {**env, e.var: len(env)}
        body = BINDERS[type(e)]
        return (t,) + tuple(alpha_key(getattr(e, f), inner if f == body else env)
                            for f in _EXPR_FIELDS[type(e)])
    return (t,) + tuple(alpha_key(getattr(e, f), env) for f in _EXPR_FIELDS[type(e)])


# -- polys ------------------------------------------------------------------

Mono = tuple  # ((Atom, Fraction), ...) sorted by atom key


def _mono_key(m: Mono) -> tuple:
    return tuple((a.key, e) for a, e in m)


class Poly:
    __slots__ = ("terms", "_key", "_hash", "_fv", "_expr")

    def __init__(self, terms: dict):
        self.terms = terms
        self._expr = None
        self._key = None
        self._hash = None
        self._fv = None

    @property
    def key(self) -> tuple:
        if self._key is None:
            self._key = tuple(sorted((_mono_key(m), c) for m, c in self.terms.items()))
        return self._key

    @property
    def fv(self) -> frozenset:
        if self._fv is None:
            out = set()
            for m in self.terms:
                for a, _ in m:
                    out |= atom_fv(a)
            self._fv = frozenset(out)
        return self._fv

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key)
        return self._hash

    def __repr__(self):
        return f"Poly({to_expr(self)})"

    def is_zero(self) -> bool:
        return not self.terms

    def const_value(self) -> Fraction | None:
        if not self.terms:
            return ZERO_Q
        if len(self.terms) == 1 and () in self.terms:
            return self.terms[()]
        return None

    def single(self):
        """(coef, mono) when the poly has exactly one term."""
        if len(self.terms) == 1:
            (m, c), = self.terms.items()
            return c, m
        return None

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda mc: _mono_key(mc[0]))


ZERO = Poly({})
ONE = Poly({(): ONE_Q})


def const(q) -> Poly:
    q = Q(q)
    return Poly({(): q}) if q else ZERO


def atom_poly(a: Atom, e=ONE_Q) -> Poly:
    return _finish_mono({a: Q(e)}, ONE_Q)


def var(name: Name) -> Poly:
    return Poly({((VarA(name), ONE_Q),): ONE_Q})


# -- facts --------------------------------------------------------------------

@dataclass(frozen=True)
class Facts:
    positive: frozenset = frozenset()      # atoms known > 0
    lt: frozenset = frozenset()            # polys known > 0
    continuous: frozenset = frozenset()    # names drawn from continuous distributions

    def with_positive(self, *atoms) -> "Facts":
        return Facts(self.positive | frozenset(atoms), self.lt, self.continuous)

    def with_lt(self, *polys) -> "Facts":
        ps = [p for p in polys if p.const_value() is None]
        return Facts(self.positive, self.lt | frozenset(ps), self.continuous)

    def with_continuous(self, *names) -> "Facts":
        return Facts(self.positive, self.lt, self.continuous | frozenset(names))


_facts: contextvars.ContextVar[Facts] = contextvars.ContextVar("facts", default=Facts())


def current_facts() -> Facts:
    return _facts.get()


@contextmanager
def assuming(facts: Facts):
    token = _facts.set(facts)
    try:
        yield facts
    finally:
        _facts.reset(token)


def atom_positive(a: Atom) -> bool:
    f = _facts.get()
    if a in f.positive:
        return True
    if isinstance(a, (PiA, RadA, ExpA)):
        return True
    if isinstance(a, (SumA, GammaA)):
        return is_positive(a.poly)
    return False


def _mono_nonneg(m: Mono) -> bool:
    for a, e in m:
        if atom_positive(a) or isinstance(a, IndA):
            continue
        if e.denominator == 1 and e.numerator % 2 == 0:
            continue
        if e.denominator % 2 == 0:  # a^(1/2) is nonnegative wherever defined
            continue
        return False
    return True


def _mono_positive(m: Mono) -> bool:
    return all(atom_positive(a) for a, _ in m)


def is_nonneg(p: Poly) -> bool:
    return all(c > 0 and _mono_nonneg(m) for m, c in p.terms.items())


def is_positive(p: Poly) -> bool:
    if not p.terms:
        return False
    if p in _facts.get().lt:
        return True
    if is_nonneg(p) and any(_mono_positive(m) for m in p.terms):
        return True
    for f in _facts.get().lt:
        d = sub(p, f, normal=False)
        if not d.terms or is_nonneg(d):
            return True
    # over a common denominator of positive factors
    if any(e < 0 for m in p.terms for _, e in m):
        try:
            num, den = together(p)
        except TooBig:
            return False
        if den and all(atom_positive(a) for a in den) and num.terms and \
                not any(e < 0 for m in num.terms for _, e in m):
            return is_positive(num)
    return False


# -- integers and radicals ----------------------------------------------------

@lru_cache(maxsize=4096)
def _factor(n: int) -> tuple:
    out = []
    p = 2
    while p * p <= n and p < 100000:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out.append(n)
    res = {}
    for f in out:
        res[f] = res.get(f, 0) + 1
    return tuple(sorted(res.items()))


def _rational_power(c: Fraction, r: Fraction) -> Poly:
    """c^r for c > 0 with radicals split into prime atoms."""
    if r.denominator == 1:
        return const(c ** r.numerator)
    coef = ONE_Q
    mono: dict = {}
    for n, sign in ((c.numerator, 1), (c.denominator, -1)):
        for p, k in _factor(n):
            ex = r * k * sign
            fl = math.floor(ex)
            coef *= Q(p) ** fl
            frac = ex - fl
            if frac:
                mono[RadA(p)] = frac
    return _finish_mono(mono, coef)


# -- monomial products ------------------------------------------------------

def _contradict(inds: list) -> bool:
    seen = set(inds)
    for a in inds:
        if a.negate() in seen:
            return True
        if a.kind == "lt" and not a.neg:
            negp = _neg_poly_raw(a.poly)
            if IndA("lt", negp, False) in seen:
                return True
            for kind_poly in (a.poly, negp):
                if IndA("eq", kind_poly, False) in seen:
                    return True
    return False


def _neg_poly_raw(p: Poly) -> Poly:
    return Poly({m: -c for m, c in p.terms.items()})


def _atom_key(ae):
    return ae[0].key


def _mk_mono(items) -> Mono:
    """Sorted monomial; integral exponents are stored as ints (cheap to hash)."""
    return tuple(sorted(((a, e.numerator if e.denominator == 1 else e) for a, e in items),
                        key=_atom_key))


def _finish_mono(d: dict, coef: Fraction) -> Poly:
    """Turn an atom->exponent map into a canonical poly (usually one term)."""
    expos = []
    inds = []
    rest = {}
    extra = None
    for a, e in d.items():
        if e == 0:
            continue
        if isinstance(a, ExpA):
            expos.append((a, e))
        elif isinstance(a, IndA):
            if e > 0:
                inds.append(a)
            else:
                rest[a] = -ONE_Q
        elif isinstance(a, RadA):
            fl = math.floor(e)
            if fl:
                coef *= Q(a.n) ** fl
            if e - fl:
                rest[a] = e - fl
        elif isinstance(a, SumA) and e >= 1:
            fl = math.floor(e)
            if e - fl:
                rest[a] = e - fl
            factor = power(a.poly, Q(fl))
            extra = factor if extra is None else mul(extra, factor)
        else:
            rest[a] = e
    if inds and _contradict(inds):
        return ZERO
    for a in inds:
        rest[a] = ONE_Q
    if expos:
        if len(expos) == 1 and expos[0][1] == 1:
            rest[expos[0][0]] = ONE_Q
        else:
            total = ZERO
            for a, e in expos:
                total = add(total, scale(a.poly, e))
            ep = exp_poly(total)
            extra = ep if extra is None else mul(extra, ep)
    mono = _mk_mono(rest.items())
    base = Poly({mono: coef}) if coef else ZERO
    if extra is not None:
        return mul(base, extra)
    return base


def _mono_mul(m1: Mono, m2: Mono, coef: Fraction) -> Poly:
    if not m1:
        if not any(isinstance(a, (SumA, RadA)) and e >= 1 for a, e in m2):
            return Poly({m2: coef}) if coef else ZERO
    if not m2:
        if not any(isinstance(a, (SumA, RadA)) and e >= 1 for a, e in m1):
            return Poly({m1: coef}) if coef else ZERO
    d = dict(m1)
    for a, e in m2:
        d[a] = d.get(a, ZERO_Q) + e
    return _finish_mono(d, coef)


# -- ring operations ------------------------------------------------------------

def _accumulate(acc: dict, p: Poly, c: Fraction = ONE_Q):
    for m, k in p.terms.items():
        v = acc.get(m, ZERO_Q) + k * c
        if v:
            acc[m] = v
        else:
            acc.pop(m, None)


def add(p: Poly, q: Poly, normal: bool = True) -> Poly:
    if not p.terms:
        return q
    if not q.terms:
        return p
    acc = dict(p.terms)
    _accumulate(acc, q)
    r = Poly(acc)
    return normalize(r) if normal else r


def add_all(ps: Iterable[Poly]) -> Poly:
    acc: dict = {}
    for p in ps:
        _accumulate(acc, p)
    return normalize(Poly(acc))


def scale(p: Poly, c) -> Poly:
    c = Q(c)
    if not c:
        return ZERO
    if c == 1:
        return p
    return Poly({m: k * c for m, k in p.terms.items()})


def neg(p: Poly) -> Poly:
    return scale(p, -1)


def sub(p: Poly, q: Poly, normal: bool = True) -> Poly:
    return add(p, scale(q, -1), normal)


def mul(p: Poly, q: Poly, normal: bool = True) -> Poly:
    if not p.terms or not q.terms:
        return ZERO
    if p == ONE:
        return q
    if q == ONE:
        return p
    if len(p.terms) * len(q.terms) > MAX_TERMS * 4:
        raise TooBig("product too large")
    acc: dict = {}
    for m1, c1 in p.terms.items():
        for m2, c2 in q.terms.items():
            _accumulate(acc, _mono_mul(m1, m2, c1 * c2))
        if len(acc) > MAX_TERMS:
            raise TooBig("product too large")
    r = Poly(acc)
    return normalize(r) if normal else r


def mul_all(ps: Iterable[Poly]) -> Poly:
    out = ONE
    for p in ps:
        out = mul(out, p)
    return out


def mono_poly(m: Mono, c=ONE_Q) -> Poly:
    return Poly({m: Q(c)}) if c else ZERO


# -- content / together ---------------------------------------------------------

def _common(p: Poly) -> dict:
    """Atom -> minimum exponent over all terms (absent counts as 0).

    ``exp`` atoms are handled separately by :func:`_common_exp`.
    """
    terms = list(p.terms)
    if not terms:
        return {}
    first = dict(terms[0])
    common = {a: e for a, e in first.items() if not isinstance(a, ExpA)}
    seen_neg: dict = {}
    for m in terms:
        dm = dict(m)
        for a, e in dm.items():
            if e < 0 and not isinstance(a, ExpA):
                seen_neg[a] = min(seen_neg.get(a, ZERO_Q), e)
        for a in list(common):
            if a not in dm:
                common[a] = min(common[a], ZERO_Q)
            else:
                common[a] = min(common[a], dm[a])
    for a, e in seen_neg.items():
        common[a] = min(common.get(a, ZERO_Q), e)
    return {a: e for a, e in common.items() if e != 0}


def _common_exp(p: Poly) -> Poly | None:
    """Additive part shared by the ``exp`` atom of every term, if any."""
    qs = []
    for m in p.terms:
        ex = [a for a, _ in m if isinstance(a, ExpA)]
        if len(ex) != 1:
            return None
        qs.append(ex[0].poly)
    if len(qs) < 2:
        return None
    shared = dict(qs[0].terms)
    for qp in qs[1:]:
        shared = {m: c for m, c in shared.items() if qp.terms.get(m) == c}
        if not shared:
            return None
    return Poly(shared)


def _divide_mono_raw(p: Poly, g: dict, gexp: Poly | None) -> Poly:
    """Divide every term of ``p`` by the monomial ``g`` (and ``exp(gexp)``)."""
    acc = {}
    shifted: dict = {}
    for m, c in p.terms.items():
        d = dict(m)
        for a, e in g.items():
            d[a] = d.get(a, ZERO_Q) - e
        if gexp is not None:
            for a in [a for a in d if isinstance(a, ExpA)]:
                e = d.pop(a)
                if a not in shifted:
                    rem = Poly({mm: cc for mm, cc in a.poly.terms.items() if gexp.terms.get(mm) != cc})
                    shifted[a] = ExpA(rem) if rem.terms else None
                if shifted[a] is not None:
                    d[shifted[a]] = e
        mono = _mk_mono((a, e) for a, e in d.items() if e != 0)
        acc[mono] = acc.get(mono, ZERO_Q) + c
    return Poly({m: c for m, c in acc.items() if c})


def _leading_sign(p: Poly) -> int:
    terms = p.sorted_terms()
    return 1 if terms[0][1] > 0 else -1


def _content(p: Poly) -> Fraction:
    nums = [c.numerator for c in p.terms.values()]
    dens = [c.denominator for c in p.terms.values()]
    g = 0
    for n in nums:
        g = math.gcd(g, abs(n))
    l = 1
    for d in dens:
        l = l * d // math.gcd(l, d)
    return Q(g, l) * _leading_sign(p)


def split_content(p: Poly):
    """Write ``p = c * mono(g) * exp(ge) * s`` with ``s`` primitive.

    Returns ``(c, g, ge, s)``; ``g`` maps atoms to exponents, ``ge`` is the
    shared exponent poly or None.
    """
    g = _common(p)
    ge = _common_exp(p)
    s = _divide_mono_raw(p, g, ge) if (g or ge is not None) else p
    c = _content(s)
    s = scale(s, 1 / c)
    return c, g, ge, s


def _mono_from(g: dict, ge: Poly | None, coef: Fraction = ONE_Q) -> Poly:
    d = dict(g)
    if ge is not None and ge.terms:
        d[ExpA(ge)] = ONE_Q
    return _finish_mono(d, coef)


def together(p: Poly):
    """Return ``(num, den)`` monomial-denominator form: p = num * den^-1.

    ``den`` is a monomial (as an atom->exponent dict) clearing all negative
    exponents, so ``num`` has none.
    """
    den: dict = {}
    for m in p.terms:
        for a, e in m:
            if e < 0 and not isinstance(a, (ExpA, IndA)):
                den[a] = max(den.get(a, ZERO_Q), -e)
    if not den:
        return p, {}
    dm = _mk_mono(den.items())
    acc: dict = {}
    for m, c in p.terms.items():
        _accumulate(acc, _mono_mul(m, dm, c))
        if len(acc) > MAX_TERMS:
            raise TooBig("together too large")
    return Poly(acc), den


# -- normalisation and cancellation -------------------------------------------------

def _plain(p: Poly) -> bool:
    return all(isinstance(a, (VarA, PiA, OpaqueA)) and e.denominator == 1 and e >= 0
               for m in p.terms for a, e in m)


def _lead(p: Poly, order: list):
    def key(mc):
        d = dict(mc[0])
        return (sum(d.values()), tuple(d.get(a, ZERO_Q) for a in order))
    return max(p.terms.items(), key=key)


def _exact_divide(r: Poly, s: Poly) -> Poly | None:
    """``r / s`` when ``s`` divides ``r`` exactly, else None."""
    if len(r.terms) < len(s.terms):
        return None
    if set(r.terms) == set(s.terms):
        (m0, c0), = [next(iter(s.terms.items()))]
        ratio = r.terms[m0] / c0
        if all(r.terms[m] == ratio * c for m, c in s.terms.items()):
            return const(ratio)
        return None
    if not (_plain(r) and _plain(s)):
        return None
    order = sorted({a for p in (r, s) for m in p.terms for a, _ in m}, key=lambda a: a.key)
    lm_s, lc_s = _lead(s, order)
    quotient: dict = {}
    rem = r
    for _ in range(20 * (len(r.terms) + 1)):
        if not rem.terms:
            return Poly(quotient)
        lm_r, lc_r = _lead(rem, order)
        dr = dict(lm_r)
        for a, e in lm_s:
            v = dr.get(a, ZERO_Q) - e
            if v < 0:
                return None
            dr[a] = v
        tm = _mk_mono((a, e) for a, e in dr.items() if e)
        tc = lc_r / lc_s
        quotient[tm] = quotient.get(tm, ZERO_Q) + tc
        acc = dict(rem.terms)
        for m, c in s.terms.items():
            d = dict(m)
            for a, e in tm:
                d[a] = d.get(a, ZERO_Q) + e
            mm = _mk_mono(d.items())
            v = acc.get(mm, ZERO_Q) - c * tc
            if v:
                acc[mm] = v
            else:
                acc.pop(mm, None)
        rem = Poly(acc)
    return None


def normalize(p: Poly) -> Poly:
    """Cancel sum atoms under negative powers against divisible numerators."""
    for _ in range(8):
        if len(p.terms) < 2:
            return p
        g = _common(p)
        cands = [(a, e) for a, e in g.items() if isinstance(a, SumA) and e < 0]
        if not cands:
            return p
        ge = _common_exp(p)
        rest = _divide_mono_raw(p, g, ge)
        done = False
        for a, e in cands:
            qt = _exact_divide(rest, a.poly)
            if qt is not None:
                g2 = dict(g)
                g2[a] = e + 1
                p = mul(qt, _mono_from(g2, ge), normal=False)
                done = True
                break
        if not done:
            return p
    return p


# -- powers ---------------------------------------------------------------------------

def reciprocal(p: Poly) -> Poly:
    return power(p, Q(-1))


def _sum_atom_power(s: Poly, r: Fraction) -> Poly:
    """s^r for a primitive multi-term poly s."""
    if len(s.terms) == 1:
        c, m = s.single()
        return _mono_power(c, m, r)
    factors = _pool_factor(s)
    if factors is None:
        return atom_poly(SumA(s), r)
    d = {}
    for f, k in factors:
        d[SumA(f)] = d.get(SumA(f), ZERO_Q) + k * r
    return _finish_mono(d, ONE_Q)


# Sums already seen during one simplification run.  A new sum is divided by
# them before it becomes an atom, so products of known factors cancel.
_pool: contextvars.ContextVar[list | None] = contextvars.ContextVar("pool", default=None)


@contextmanager
def factor_pool():
    token = _pool.set([])
    try:
        yield
    finally:
        _pool.reset(token)


def _pool_factor(s: Poly):
    pool = _pool.get()
    if pool is None or not _plain(s):
        return None
    out = []
    for t in list(pool):
        k = 0
        while len(s.terms) >= len(t.terms) and s != t:
            q = _exact_divide(s, t)
            if q is None or q.const_value() is not None:
                break
            c, g, ge, q2 = split_content(q)
            if c != 1 or g or ge is not None:
                break
            s, k = q2, k + 1
        if k:
            out.append((t, k))
    if len(s.terms) > 1:
        if s not in pool:
            pool.append(s)
        out.append((s, 1))
    elif s != ONE:
        return None
    return out if len(out) > 1 or (out and out[0][1] != 1) else None


def _mono_power(c: Fraction, m: Mono, r: Fraction) -> Poly:
    """(c * m)^r, splitting over factors where that is valid."""
    if r.denominator == 1:
        d = {a: e * r for a, e in m}
        return _finish_mono(d, c ** r.numerator)
    ok = c > 0 and all(atom_positive(a) or isinstance(a, IndA) or
                       (isinstance(a, SumA) and e.denominator == 1 and e.numerator % 2 == 0)
                       for a, e in m)
    if not ok:
        return atom_poly(BaseA(mono_poly(m, c)), r)
    d = {}
    for a, e in m:
        if isinstance(a, IndA):
            d[a] = ONE_Q if e * r > 0 else -ONE_Q
        elif isinstance(a, ExpA):
            d[a] = ONE_Q
        else:
            d[a] = e * r
    exp_atoms = [a for a, _ in m if isinstance(a, ExpA)]
    for a in exp_atoms:
        del d[a]
    out = mul(_rational_power(c, r), _finish_mono(d, ONE_Q))
    for a in exp_atoms:
        out = mul(out, exp_poly(scale(a.poly, r)))
    return out


def power(p: Poly, r) -> Poly:
    r = Q(r)
    if r == 0:
        return ONE
    if r == 1:
        return p
    if not p.terms:
        if r > 0:
            return ZERO
        raise ZeroDivisionError("zero to a negative power")
    sg = p.single()
    if sg is not None:
        return _mono_power(sg[0], sg[1], r)
    if r.denominator == 1 and r > 0:
        n = r.numerator
        result, base = ONE, p
        while n:
            if n & 1:
                result = mul(result, base)
            n >>= 1
            if n:
                base = mul(base, base)
        return result
    num, den = together(p)
    c, g, ge, s = split_content(num)
    if r.denominator != 1:
        ok = c > 0 and all(atom_positive(a) for a in g) and all(atom_positive(a) for a in den)
        if not ok:
            return atom_poly(BaseA(p), r)
    out = _sum_atom_power(s, r)
    out = mul(out, _mono_power(c, tuple(sorted(g.items(), key=lambda ae: ae[0].key)), r))
    if ge is not None and ge.terms:
        out = mul(out, exp_poly(scale(ge, r)))
    if den:
        out = mul(out, _mono_power(ONE_Q, tuple(sorted(den.items(), key=lambda ae: ae[0].key)), -r))
    return out


# -- exp / log / gamma -----------------------------------------------------------------

def exp_poly(q: Poly) -> Poly:
    """exp(q), pulling ``k*log(a)`` terms out as ``a^k`` for positive ``a``."""
    if not q.terms:
        return ONE
    pulled = []
    rest = {}
    for m, c in q.terms.items():
        if len(m) == 1 and isinstance(m[0][0], LogA) and m[0][1] == 1 and is_positive(m[0][0].poly):
            pulled.append((m[0][0].poly, c))
        else:
            rest[m] = c
    out = ONE
    if rest:
        out = Poly({((ExpA(Poly(rest)), ONE_Q),): ONE_Q})
    for base, k in pulled:
        out = mul(out, power(base, k))
    return out


def log_poly(p: Poly) -> Poly:
    if not p.terms:
        return atom_poly(LogA(p))
    sg = p.single()
    if sg is not None:
        c, m = sg
        if c > 0 and all(atom_positive(a) for a, _ in m):
            out = _log_rational(c)
            for a, e in m:
                out = add(out, scale(_log_atom(a), e))
            return out
        return atom_poly(LogA(p))
    num, den = together(p)
    c, g, ge, s = split_content(num)
    if c > 0 and all(atom_positive(a) for a in g) and all(atom_positive(a) for a in den):
        out = add(_log_rational(c), atom_poly(LogA(s)))
        for a, e in g.items():
            out = add(out, scale(_log_atom(a), e))
        for a, e in den.items():
            out = sub(out, scale(_log_atom(a), e))
        if ge is not None:
            out = add(out, ge)
        return out
    return atom_poly(LogA(p))


def _log_atom(a: Atom) -> Poly:
    if isinstance(a, ExpA):
        return a.poly
    if isinstance(a, RadA):
        return atom_poly(LogA(const(a.n)))
    if isinstance(a, SumA):
        return atom_poly(LogA(a.poly))
    return atom_poly(LogA(atom_poly(a)))


def _log_rational(c: Fraction) -> Poly:
    if c == 1:
        return ZERO
    out = ZERO
    for n, sign in ((c.numerator, 1), (c.denominator, -1)):
        for p, k in _factor(n):
            out = add(out, scale(atom_poly(LogA(const(p))), k * sign))
    return out


def gamma_poly(p: Poly) -> Poly:
    cv = p.const_value()
    if cv is not None:
        if cv.denominator == 1 and 1 <= cv <= 171:
            return const(math.factorial(cv.numerator - 1))
        if cv.denominator == 2 and 0 < cv < 171:
            # gamma(n + 1/2) = (2n)! / (4^n n!) sqrt(pi)
            n = int(cv - Q(1, 2))
            coef = Q(math.factorial(2 * n), 4 ** n * math.factorial(n))
            return mul(const(coef), atom_poly(PiA(), Q(1, 2)))
        return atom_poly(GammaA(p))
    k = p.terms.get((), ZERO_Q)
    shift = math.floor(k)
    if shift >= 1 and shift <= 32:
        base = add(p, const(-shift))
        out = atom_poly(GammaA(base))
        for i in range(shift):
            out = mul(out, add(base, const(i)))
        return out
    return atom_poly(GammaA(p))


# -- indicators -------------------------------------------------------------------------

def _primitive_for_cond(p: Poly, signed: bool) -> Poly:
    """Divide out positive content and positive monomial factors."""
    c, g, ge, s = split_content(p)
    if any(not atom_positive(a) for a in g) or (ge is not None):
        # cannot divide by factors of unknown sign; keep the content only
        cc = abs(_content(p))
        s = scale(p, 1 / cc)
        if signed and _leading_sign(s) < 0:
            s = neg(s)
        return s
    if not signed and c < 0:
        s = neg(s)
    return s


def lt_zero_poly(p: Poly) -> Poly:
    """Indicator of ``0 < p`` as a 0/1 poly."""
    p = normalize(p)
    cv = p.const_value()
    if cv is not None:
        return ONE if cv > 0 else ZERO
    if is_positive(p):
        return ONE
    np_ = neg(p)
    if is_positive(np_) or is_nonneg(np_):
        return ZERO
    s = _primitive_for_cond(p, signed=False)
    if s.const_value() is not None:
        return ONE if s.const_value() > 0 else ZERO
    return atom_poly(IndA("lt", s, False))


def eq_zero_poly(p: Poly) -> Poly:
    """Indicator of ``p == 0`` as a 0/1 poly."""
    p = normalize(p)
    cv = p.const_value()
    if cv is not None:
        return ONE if cv == 0 else ZERO
    if is_positive(p) or is_positive(neg(p)):
        return ZERO
    cont = _facts.get().continuous
    for x in p.fv & cont:
        co = coeffs_in(p, x)
        if co is not None and set(co) == {0, 1} and co[1].const_value() not in (None, 0):
            return ZERO
    s = _primitive_for_cond(p, signed=True)
    if s.const_value() is not None:
        return ONE if s.const_value() == 0 else ZERO
    return atom_poly(IndA("eq", s, False))


def not_poly(c: Poly) -> Poly:
    cv = c.const_value()
    if cv is not None:
        return ONE if cv == 0 else ZERO
    sg = c.single()
    if sg is not None and sg[0] == 1 and len(sg[1]) == 1 and isinstance(sg[1][0][0], IndA) and sg[1][0][1] > 0:
        return atom_poly(sg[1][0][0].negate())
    return sub(ONE, c)


# -- polynomial structure in one variable ----------------------------------------------

def depends(a: Atom, x: Name) -> bool:
    return x in atom_fv(a)


def split_mono(m: Mono, x: Name):
    """Split a monomial into (x-dependent part, x-free part) as dicts."""
    dep, free = {}, {}
    for a, e in m:
        (dep if depends(a, x) else free)[a] = e
    return dep, free


def coeffs_in(p: Poly, x: Name) -> dict | None:
    """Coefficients of ``p`` as a polynomial in the variable ``x``.

    Returns {degree: poly} or None when ``p`` is not polynomial in ``x``.
    """
    vx = VarA(x)
    out: dict = {}
    for m, c in p.terms.items():
        deg = 0
        rest = []
        for a, e in m:
            if a == vx:
                if e.denominator != 1 or e < 0:
                    return None
                deg = int(e)
            elif depends(a, x):
                return None
            else:
                rest.append((a, e))
        out.setdefault(deg, {})
        out[deg][tuple(rest)] = out[deg].get(tuple(rest), ZERO_Q) + c
    return {d: Poly({m: c for m, c in t.items() if c}) for d, t in out.items()}


# -- closed-form integration -----------------------------------------------------------

INF = object()


def _kernel_parts(dep: dict, x: Name):
    """Decompose the x-dependent part of a monomial.

    Returns (power_of_x, exp_poly_or_None, power_of_(1-x), others) where the
    exponents are polys.  ``others`` lists atoms not covered.
    """
    vx = VarA(x)
    px = ZERO
    p1 = ZERO
    q = None
    others = []
    one_minus = normalize(Poly({(): ONE_Q, ((vx, ONE_Q),): -ONE_Q}))
    for a, e in dep.items():
        if a == vx:
            px = add(px, const(e))
        elif isinstance(a, ExpA):
            q = a.poly
        elif isinstance(a, SumA) and a.poly == one_minus:
            p1 = add(p1, const(e))
        else:
            others.append(a)
    return px, q, p1, others, one_minus


def _log_coeff(q: Poly, target: Poly):
    """Split q into (coefficient of log(target), remainder)."""
    coef = ZERO
    rest = {}
    for m, c in q.terms.items():
        hit = None
        for a, e in m:
            if isinstance(a, LogA) and a.poly == target and e == 1:
                hit = a
        if hit is not None:
            others = tuple((a, e) for a, e in m if a is not hit)
            coef = add(coef, mono_poly(others, c))
        else:
            rest[m] = c
    return coef, Poly(rest)


def pow_poly(base: Poly, ex: Poly) -> Poly:
    cv = ex.const_value()
    if cv is not None:
        return power(base, cv)
    if is_positive(base):
        return exp_poly(mul(ex, log_poly(base)))
    raise NotArithmetic("symbolic power of a base of unknown sign")


def _gauss(q: Poly, k: int, x: Name) -> Poly | None:
    co = coeffs_in(q, x)
    if co is None or max(co) > 2 or 2 not in co:
        return None
    a = co[2]
    b = co.get(1, ZERO)
    c = co.get(0, ZERO)
    na = neg(a)
    if not is_positive(na):
        return None
    # integral of x^k exp(a x^2 + b x + c) over the real line
    base = mul(power(mul(PI, reciprocal(na)), Q(1, 2)),
               exp_poly(sub(c, mul(power(b, 2), reciprocal(scale(a, 4))))))
    if k == 0:
        return base
    mu = mul(neg(b), reciprocal(scale(a, 2)))
    if k == 1:
        return mul(base, mu)
    if k == 2:
        return mul(base, add(power(mu, 2), reciprocal(scale(na, 2))))
    return None


PI = atom_poly(PiA())


def integrate_term(c: Fraction, m: Mono, x: Name, lo, hi) -> Poly | None:
    """Closed form of the integral over x in (lo, hi) of one term, or None.

    ``lo``/``hi`` are polys or the sentinel :data:`INF` (with sign given by
    position: ``lo is INF`` means minus infinity).
    """
    dep, free = split_mono(m, x)
    outer = _finish_mono(free, c)
    if not dep:
        if lo is INF or hi is INF:
            return None
        return mul(outer, sub(hi, lo))
    if any(isinstance(a, IndA) for a in dep):
        return None
    px, q, p1, others, one_minus = _kernel_parts(dep, x)
    if others:
        return None
    lx = lx1 = ZERO
    if q is not None:
        lx, q = _log_coeff(q, var(x))
        lx1, q = _log_coeff(q, one_minus)
        if not q.terms:
            q = None
    s = add(px, lx)
    t = add(p1, lx1)
    if lo is INF and hi is INF:
        if t.terms or lx.terms or q is None:
            return None
        k = px.const_value()
        if k is None or k.denominator != 1 or k < 0:
            return None
        g = _gauss(q, int(k), x)
        return None if g is None else mul(outer, g)
    if hi is INF and lo is not INF and lo.is_zero():
        # Gamma kernel: x^s exp(beta x + c)
        if t.terms or q is None:
            return None
        co = coeffs_in(q, x)
        if co is None or max(co) != 1:
            return None
        beta, c0 = co[1], co.get(0, ZERO)
        nb = neg(beta)
        if not is_positive(nb):
            return None
        s1 = add(s, ONE)
        return mul_all([outer, exp_poly(c0), gamma_poly(s1), pow_poly(nb, neg(s1))])
    if lo is INF or hi is INF:
        return None
    if lo.is_zero() and hi == ONE and (t.terms or s.const_value() is None):
        if q is not None:
            return None
        s1, t1 = add(s, ONE), add(t, ONE)
        return mul_all([outer, gamma_poly(s1), gamma_poly(t1), reciprocal(gamma_poly(add(s1, t1)))])
    # polynomial on a finite interval
    if q is not None or t.terms:
        return None
    k = s.const_value()
    if k is None or k.denominator != 1 or k < 0:
        return None
    k = int(k)
    return mul(outer, scale(sub(power(hi, k + 1), power(lo, k + 1)), Q(1, k + 1)))


def integrate(p: Poly, x: Name, lo, hi) -> Poly | None:
    parts = []
    for m, c in p.terms.items():
        r = integrate_term(c, m, x, lo, hi)
        if r is None:
            return None
        parts.append(r)
    return add_all(parts)


# -- conversion from Expr ---------------------------------------------------------------

ARITH = (Lit, Const, Neg, Add, Sub, Mul, Div, Pow, Exp, Log, Sqrt, GammaFn)
BOOL = (Less, Equal, And, Not, BoolLit)


class Canon:
    """Converts Exprs to polys under the current facts.

    ``leaf`` is called on non-arithmetic subterms (applications, projections,
    integrals, ...) and returns a possibly rewritten Expr; an unchanged result
    becomes an opaque atom, a changed one is converted again.
    """

    def __init__(self, leaf: Callable[[Expr], Expr] | None = None):
        self.leaf = leaf
        self.memo: dict = {}

    def __call__(self, e: Expr) -> Poly:
        key = (e, _facts.get())
        r = self.memo.get(key)
        if r is None:
            r = self._conv(e)
            if len(self.memo) > 50000:
                self.memo.clear()
            self.memo[key] = r
        return r

    def _conv(self, e: Expr) -> Poly:
        match e:
            case Lit(q):
                return const(q)
            case Const("pi"):
                return PI
            case Const(_):
                raise NotArithmetic("infinity outside a bound")
            case Var(x):
                return var(x)
            case Neg(a):
                return neg(self(a))
            case Add(a, b):
                return add(self(a), self(b))
            case Sub(a, b):
                return sub(self(a), self(b))
            case Mul(a, b):
                return mul(self(a), self(b))
            case Div(a, b):
                return mul(self(a), reciprocal(self(b)))
            case Pow(a, b):
                pb = self(b)
                cv = pb.const_value()
                pa = self(a)
                if cv is not None:
                    return power(pa, cv)
                if is_positive(pa):
                    return exp_poly(mul(pb, log_poly(pa)))
                return self._opaque(Pow(to_expr(pa), to_expr(pb)))
            case Sqrt(a):
                return power(self(a), Q(1, 2))
            case Exp(a):
                return exp_poly(self(a))
            case Log(a):
                return log_poly(self(a))
            case GammaFn(a):
                return gamma_poly(self(a))
            case If(c, a, b):
                cp = self.cond(c)
                cv = cp.const_value()
                if cv is not None:
                    return self(a) if cv else self(b)
                pa = self(a)
                pb = self(b)
                if not pb.terms:
                    return mul(cp, pa)
                return add(mul(cp, pa), mul(not_poly(cp), pb))
            case Less() | Equal() | And() | Not() | BoolLit():
                return self.cond(e)
        return self._leaf(e)

    def _leaf(self, e: Expr) -> Poly:
        if self.leaf is not None:
            r = self.leaf(e)
            if r != e:
                return self(r)
            e = r
        return self._opaque(e)

    def _opaque(self, e: Expr) -> Poly:
        return atom_poly(OpaqueA(e))

    def cond(self, c: Expr) -> Poly:
        match c:
            case BoolLit(b):
                return ONE if b else ZERO
            case Less(a, b):
                return lt_zero_poly(sub(self(b), self(a)))
            case Equal(a, b):
                return eq_zero_poly(sub(self(a), self(b)))
            case And(a, b):
                return mul(self.cond(a), self.cond(b))
            case Not(a):
                return not_poly(self.cond(a))
            case If(k, a, b):
                kp = self.cond(k)
                return add(mul(kp, self.cond(a)), mul(not_poly(kp), self.cond(b)))
        raise NotArithmetic("not a condition")


# -- conversion back to Expr ---------------------------------------------------------------

def _lit(q: Fraction) -> Expr:
    return Lit(Q(q))


def _fmul(a: Expr | None, b: Expr) -> Expr:
    return b if a is None else Mul(a, b)


def atom_expr(a: Atom) -> Expr:
    try:
        return a._expr
    except AttributeError:
        a._expr = out = _atom_expr(a)
        return out


def _atom_expr(a: Atom) -> Expr:
    if isinstance(a, VarA):
        return Var(a.name)
    if isinstance(a, PiA):
        return Const("pi")
    if isinstance(a, RadA):
        return _lit(a.n)
    if isinstance(a, OpaqueA):
        return a.expr
    if isinstance(a, (SumA, BaseA)):
        return to_expr(a.poly)
    if isinstance(a, LogA):
        return Log(to_expr(a.poly))
    if isinstance(a, GammaA):
        return GammaFn(to_expr(a.poly))
    if isinstance(a, ExpA):
        return Exp(to_expr(a.poly))
    if isinstance(a, IndA):
        return If(cond_expr([a]), _lit(1), _lit(0))
    raise TypeError(a)


def _power_expr(base: Expr, e: Fraction) -> Expr:
    if e == 1:
        return base
    if e == Q(1, 2):
        return Sqrt(base)
    return Pow(base, _lit(e))


def mono_expr(c: Fraction, m: Mono) -> Expr:
    """Expr for ``c * m`` with c > 0 expected (signs are handled by callers)."""
    # sqrt(p)/p reads better as 1/sqrt(p)
    moved = []
    for a, e in m:
        if isinstance(a, RadA) and e == Q(1, 2) and c.denominator % a.n == 0:
            c = c * a.n
            moved.append((a, Q(-1, 2)))
        else:
            moved.append((a, e))
    m = tuple(moved)
    num: Expr | None = None
    den: Expr | None = None
    if c.numerator != 1:
        num = _lit(c.numerator)
    if c.denominator != 1:
        den = _lit(c.denominator)
    half_num, half_den = [], []
    for a, e in m:
        if e == Q(1, 2):
            half_num.append(atom_expr(a))
            continue
        if e == Q(-1, 2):
            half_den.append(atom_expr(a))
            continue
        if e > 0:
            num = _fmul(num, _power_expr(atom_expr(a), e))
        else:
            den = _fmul(den, _power_expr(atom_expr(a), -e))
    if half_num:
        prod = half_num[0]
        for h in half_num[1:]:
            prod = Mul(prod, h)
        num = _fmul(num, Sqrt(prod))
    if half_den:
        prod = half_den[0]
        for h in half_den[1:]:
            prod = Mul(prod, h)
        den = _fmul(den, Sqrt(prod))
    if num is None:
        num = _lit(1)
    return num if den is None else Div(num, den)


def _sum_expr(terms: list) -> Expr:
    out: Expr | None = None
    for m, c in terms:
        if out is None:
            out = mono_expr(c, m) if c > 0 else Neg(mono_expr(-c, m))
        elif c > 0:
            out = Add(out, mono_expr(c, m))
        else:
            out = Sub(out, mono_expr(-c, m))
    return out if out is not None else _lit(0)


def _group_expr(terms: list) -> Expr:
    """Expr for a sum of terms.

    Terms are grouped by the sums they divide by, and each group is written
    over its own denominator.  Nothing is put over a common denominator, so
    converting the result back gives the same terms.
    """
    if len(terms) == 1:
        return _sum_expr(terms)
    parts: dict = {}
    for m, c in terms:
        key = tuple((a, e) for a, e in m if isinstance(a, (SumA, BaseA)) and e < 0)
        parts.setdefault(key, []).append((m, c))
    out: Expr | None = None
    for key in sorted(parts, key=_mono_key):
        e = _factored(parts[key])
        if out is None:
            out = e
        elif isinstance(e, Neg):
            out = Sub(out, e.arg)
        else:
            out = Add(out, e)
    return out


def _factored(terms: list) -> Expr:
    if len(terms) == 1:
        return _sum_expr(terms)
    dicts = [dict(m) for m, _ in terms]
    common = {}
    for a, e in dicts[0].items():
        if isinstance(a, IndA) and e > 0:
            continue
        if not all(a in d for d in dicts[1:]):
            continue
        if isinstance(a, (SumA, BaseA, ExpA, IndA)):
            if all(d[a] == e for d in dicts):
                common[a] = e
        else:
            common[a] = min(d[a] for d in dicts)
    ordered = sorted(terms, key=lambda mc: _mono_key(mc[0]))
    if not common:
        return _sum_expr(ordered)
    rest = []
    for m, c in ordered:
        d = dict(m)
        for a, e in common.items():
            d[a] -= e
        rest.append((tuple((a, e) for a, e in m if d[a] != 0 for e in (d[a],)), c))
    inner = _sum_expr(sorted(rest, key=lambda mc: _mono_key(mc[0])))
    gm = tuple(sorted(common.items(), key=lambda ae: ae[0].key))
    num = tuple((a, e) for a, e in gm if e > 0)
    den = tuple((a, -e) for a, e in gm if e < 0)
    if num:
        inner = Mul(inner, mono_expr(ONE_Q, num))
    if den:
        inner = Div(inner, mono_expr(ONE_Q, den))
    return inner


def _cmp_expr(a: IndA) -> Expr:
    try:
        return a._cmp
    except AttributeError:
        a._cmp = out = _cmp_expr_raw(a)
        return out


def _cmp_expr_raw(a: IndA) -> Expr:
    pos = Poly({m: c for m, c in a.poly.terms.items() if c > 0})
    negp = Poly({m: -c for m, c in a.poly.terms.items() if c < 0})
    left, right = to_expr(negp), to_expr(pos)
    if a.kind == "lt":
        base = Less(left, right)
    else:
        base = Equal(right, left) if pos.terms else Equal(left, right)
    return Not(base) if a.neg else base


def cond_expr(inds: list) -> Expr:
    """Conjunction of indicator atoms, pairing ``a<b`` with ``b<c``."""
    exprs = [_cmp_expr(a) for a in sorted(inds, key=lambda a: a.key)]
    used = [False] * len(exprs)
    parts = []
    for i, e in enumerate(exprs):
        if used[i]:
            continue
        used[i] = True
        if isinstance(e, Less):
            for j in range(len(exprs)):
                f = exprs[j]
                if not used[j] and isinstance(f, Less) and f.left == e.right:
                    used[j] = True
                    e = And(e, f)
                    break
                if not used[j] and isinstance(f, Less) and f.right == e.left:
                    used[j] = True
                    e = And(f, e)
                    break
        parts.append(e)
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def to_expr(p: Poly) -> Expr:
    if p._expr is None:
        p._expr = _to_expr(p)
    return p._expr


def _to_expr(p: Poly) -> Expr:
    if not p.terms:
        return _lit(0)
    groups: dict = {}
    for m, c in p.terms.items():
        inds = tuple(a for a, e in m if isinstance(a, IndA) and e > 0)
        rest = tuple((a, e) for a, e in m if not (isinstance(a, IndA) and e > 0))
        groups.setdefault(inds, []).append((rest, c))
    out: Expr | None = None
    for inds in sorted(groups, key=lambda t: tuple(a.key for a in t)):
        body = _group_expr(groups[inds])
        if inds:
            body = If(cond_expr(list(inds)), body, _lit(0))
        out = body if out is None else Add(out, body)
    return out


def bool_expr(p: Poly) -> Expr | None:
    """Expr for a 0/1 poly that is a constant or a conjunction of indicators."""
    cv = p.const_value()
    if cv is not None:
        return BoolLit(bool(cv))
    sg = p.single()
    if sg is not None and sg[0] == 1 and all(isinstance(a, IndA) and e > 0 for a, e in sg[1]):
        return cond_expr([a for a, _ in sg[1]])
    return None
