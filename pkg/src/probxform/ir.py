"""Expression IR shared by every transformation.

Terms are immutable frozen dataclasses.  Binders (``Lam``, ``Bind``, ``Int``,
``Sum``) carry a single :class:`Name`; tuple binders from the surface syntax
are desugared by the parser into projections.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Callable, Iterable, Mapping

__all__ = [
    "Name", "fresh", "Expr",
    "Var", "Lit", "Const", "BoolLit", "UnitLit",
    "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Less", "Equal", "And", "Not",
    "Exp", "Log", "Sqrt", "GammaFn", "If", "Sum", "Int",
    "Lam", "App", "Pair", "Fst", "Snd",
    "Uniform", "Normal", "Gamma", "Beta", "Weight", "Categorical", "Superpose", "Bind",
    "PRIMITIVES", "CONTINUOUS", "MEASURE_FORMS", "BINDERS",
    "children", "with_children", "free_vars", "substitute", "subst", "alpha_equal",
    "lit", "dirac", "unit", "pi", "inf", "neg_inf", "is_inf", "size", "walk",
]


@dataclass(frozen=True, order=True)
class Name:
    text: str
    uid: int = 0

    def __str__(self) -> str:
        return self.text if self.uid == 0 else f"{self.text}_{self.uid}"


_supply = itertools.count(1)


def fresh(hint: str | Name = "x") -> Name:
    """Return a name whose uid no other fresh call has produced."""
    text = hint.text if isinstance(hint, Name) else hint
    return Name(text, next(_supply))


class Expr:
    """Base class; concrete variants are declared with :func:`_node`."""

    __slots__ = ()

    def __str__(self) -> str:  # pragma: no cover - convenience
        from .syntax import pretty
        return pretty(self)


def _cached_hash(self):
    h = self.__dict__.get("_h")
    if h is None:
        h = hash((type(self).__name__,) + tuple(getattr(self, f) for f in _FIELDS[type(self)]))
        object.__setattr__(self, "_h", h)
    return h


_FIELDS: dict[type, tuple[str, ...]] = {}
_EXPR_FIELDS: dict[type, tuple[str, ...]] = {}


def _node(*expr_fields: str):
    def wrap(cls):
        cls = dataclass(frozen=True, repr=True)(cls)
        _FIELDS[cls] = tuple(f.name for f in fields(cls))
        _EXPR_FIELDS[cls] = expr_fields
        cls.__hash__ = _cached_hash
        return cls
    return wrap


@_node()
class Var(Expr):
    name: Name


@_node()
class Lit(Expr):
    value: Fraction


@_node()
class Const(Expr):
    name: str  # "pi" or "inf"


@_node()
class BoolLit(Expr):
    value: bool


@_node()
class UnitLit(Expr):
    pass


@_node("arg")
class Neg(Expr):
    arg: Expr


@_node("left", "right")
class Add(Expr):
    left: Expr
    right: Expr


@_node("left", "right")
class Sub(Expr):
    left: Expr
    right: Expr


@_node("left", "right")
class Mul(Expr):
    left: Expr
    right: Expr


@_node("left", "right")
class Div(Expr):
    left: Expr
    right: Expr


@_node("base", "exponent")
class Pow(Expr):
    base: Expr
    exponent: Expr


@_node("left", "right")
class Less(Expr):
    left: Expr
    right: Expr


@_node("left", "right")
class Equal(Expr):
    left: Expr
    right: Expr


@_node("left", "right")
class And(Expr):
    left: Expr
    right: Expr


@_node("arg")
class Not(Expr):
    arg: Expr


@_node("arg")
class Exp(Expr):
    arg: Expr


@_node("arg")
class Log(Expr):
    arg: Expr


@_node("arg")
class Sqrt(Expr):
    arg: Expr


@_node("arg")
class GammaFn(Expr):
    arg: Expr


@_node("cond", "then", "orelse")
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@_node("lo", "hi", "body")
class Sum(Expr):
    lo: Expr
    hi: Expr
    var: Name
    body: Expr


@_node("lo", "hi", "body")
class Int(Expr):
    lo: Expr
    hi: Expr
    var: Name
    body: Expr


@_node("body")
class Lam(Expr):
    var: Name
    body: Expr


@_node("fn", "arg")
class App(Expr):
    fn: Expr
    arg: Expr


@_node("fst", "snd")
class Pair(Expr):
    fst: Expr
    snd: Expr


@_node("arg")
class Fst(Expr):
    arg: Expr


@_node("arg")
class Snd(Expr):
    arg: Expr


@_node("lo", "hi")
class Uniform(Expr):
    lo: Expr
    hi: Expr


@_node("mean", "sd")
class Normal(Expr):
    mean: Expr
    sd: Expr


@_node("shape", "scale")
class Gamma(Expr):
    shape: Expr
    scale: Expr


@_node("a", "b")
class Beta(Expr):
    a: Expr
    b: Expr


@_node("weight", "point")
class Weight(Expr):
    weight: Expr
    point: Expr


@_node()
class Categorical(Expr):
    pairs: tuple  # ((weight, outcome), ...)


@_node()
class Superpose(Expr):
    pairs: tuple  # ((weight, measure), ...)


@_node("rhs", "body")
class Bind(Expr):
    var: Name
    rhs: Expr
    body: Expr


CONTINUOUS = (Uniform, Normal, Gamma, Beta)
PRIMITIVES = CONTINUOUS + (Categorical,)
MEASURE_FORMS = PRIMITIVES + (Weight, Superpose, Bind)
# binder class -> the one field the bound variable scopes over
BINDERS = {Sum: "body", Int: "body", Lam: "body", Bind: "body"}


# -- construction helpers ---------------------------------------------------

def lit(x) -> Lit:
    return Lit(Fraction(x))


def dirac(e: Expr) -> Weight:
    return Weight(Lit(Fraction(1)), e)


def unit() -> UnitLit:
    return UnitLit()


def pi() -> Const:
    return Const("pi")


def inf() -> Const:
    return Const("inf")


def neg_inf() -> Neg:
    return Neg(Const("inf"))


def is_inf(e: Expr, sign: int = 1) -> bool:
    if sign > 0:
        return e == Const("inf")
    return isinstance(e, Neg) and e.arg == Const("inf")


# -- generic traversal -------------------------------------------------------

def children(e: Expr) -> tuple:
    if isinstance(e, (Categorical, Superpose)):
        return tuple(x for pair in e.pairs for x in pair)
    return tuple(getattr(e, f) for f in _EXPR_FIELDS[type(e)])


def with_children(e: Expr, kids: Iterable[Expr]) -> Expr:
    kids = tuple(kids)
    if isinstance(e, (Categorical, Superpose)):
        pairs = tuple((kids[i], kids[i + 1]) for i in range(0, len(kids), 2))
        return e if pairs == e.pairs else type(e)(pairs)
    names = _EXPR_FIELDS[type(e)]
    if all(getattr(e, f) is k for f, k in zip(names, kids)):
        return e
    values = {f: getattr(e, f) for f in _FIELDS[type(e)]}
    values.update(zip(names, kids))
    return type(e)(**values)


def walk(e: Expr):
    """Pre-order iterator over all subterms."""
    stack = [e]
    while stack:
        t = stack.pop()
        yield t
        stack.extend(reversed(children(t)))


def size(e: Expr) -> int:
    return sum(1 for _ in walk(e))


def free_vars(e: Expr) -> frozenset:
    fv = e.__dict__.get("_fv")
    if fv is not None:
        return fv
    if isinstance(e, Var):
        fv = frozenset((e.name,))
    elif type(e) in BINDERS:
        out = set()
        for f in _EXPR_FIELDS[type(e)]:
            sub = free_vars(getattr(e, f))
            if f == BINDERS[type(e)]:
                sub = sub - {e.var}
            out |= sub
        fv = frozenset(out)
    else:
        kids = children(e)
        fv = frozenset().union(*map(free_vars, kids)) if kids else frozenset()
    object.__setattr__(e, "_fv", fv)
    return fv


def subst(e: Expr, mapping: Mapping[Name, Expr]) -> Expr:
    """Simultaneous capture-avoiding substitution."""
    if not mapping:
        return e
    fv = free_vars(e)
    mapping = {k: v for k, v in mapping.items() if k in fv}
    if not mapping:
        return e
    if isinstance(e, Var):
        return mapping[e.name]
    if type(e) in BINDERS:
        x = e.var
        inner = {k: v for k, v in mapping.items() if k != x}
        body_field = BINDERS[type(e)]
        body = getattr(e, body_field)
        incoming = frozenset().union(*(free_vars(v) for v in inner.values())) if inner else frozenset()
        if x in incoming and inner and any(k in free_vars(body) for k in inner):
            y = fresh(x)
            inner[x] = Var(y)
        else:
            y = x
        values = {f: getattr(e, f) for f in _FIELDS[type(e)]}
        for f in _EXPR_FIELDS[type(e)]:
            values[f] = subst(getattr(e, f), inner if f == body_field else mapping)
        values["var"] = y
        return type(e)(**values)
    return with_children(e, (subst(k, mapping) for k in children(e)))


def substitute(e: Expr, x: Name, v: Expr) -> Expr:
    return subst(e, {x: v})


def alpha_equal(a: Expr, b: Expr) -> bool:
    return _alpha(a, b, {}, {}, 0)


def _alpha(a, b, la: dict, lb: dict, depth: int) -> bool:
    if a is b and not la and not lb:
        return True
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        ia, ib = la.get(a.name), lb.get(b.name)
        if ia is None and ib is None:
            return a.name == b.name
        return ia == ib
    if isinstance(a, (Lit, Const, BoolLit, UnitLit)):
        return a == b
    if isinstance(a, (Categorical, Superpose)) and len(a.pairs) != len(b.pairs):
        return False
    if type(a) in BINDERS:
        body_field = BINDERS[type(a)]
        for f in _EXPR_FIELDS[type(a)]:
            if f == body_field:
                la2 = {**la, a.var: depth}
                lb2 = {**lb, b.var: depth}
                if not _alpha(getattr(a, f), getattr(b, f), la2, lb2, depth + 1):
                    return False
            elif not _alpha(getattr(a, f), getattr(b, f), la, lb, depth):
                return False
        return True
    ka, kb = children(a), children(b)
    return len(ka) == len(kb) and all(_alpha(x, y, la, lb, depth) for x, y in zip(ka, kb))


def map_expr(e: Expr, f: Callable[[Expr], Expr]) -> Expr:
    """Rebuild ``e`` bottom-up, applying ``f`` to every rebuilt node."""
    return f(with_children(e, (map_expr(k, f) for k in children(e))))
