"""The expectation transformation: a measure and an integrand become a term
denoting the integral, with ``Int``/``Sum`` left symbolic."""

from __future__ import annotations

from functools import reduce

from .densities import ONE, ZERO, density_of, mul, support
from .errors import Unsupported
from .ir import (
    Add, App, Bind, Categorical, CONTINUOUS, Div, Expr, If, Int, Lam, Superpose, Sub,
    Uniform, Var, Weight, fresh, substitute,
)


def apply(f: Expr, arg: Expr) -> Expr:
    """``App(f, arg)`` with one step of beta reduction when ``f`` is a Lam."""
    if isinstance(f, Lam):
        return substitute(f.body, f.var, arg)
    return App(f, arg)


def _binder(f: Expr):
    if isinstance(f, Lam):
        return f.var
    return fresh("x")


def expect(m: Expr, f: Expr) -> Expr:
    match m:
        case Weight(w, e):
            return mul(w, apply(f, e))
        case Uniform(a, b):
            x = _binder(f)
            return Div(Int(a, b, x, apply(f, Var(x))), Sub(b, a))
        case _ if isinstance(m, CONTINUOUS):
            x = _binder(f)
            lo, hi = support(m)
            return Int(lo, hi, x, mul(density_of(m, Var(x)), apply(f, Var(x))))
        case Categorical(pairs):
            if not pairs:
                raise Unsupported("empty Categorical")
            num = reduce(Add, (mul(w, apply(f, v)) for w, v in pairs))
            return Div(num, reduce(Add, (w for w, _ in pairs)))
        case Superpose(pairs):
            if not pairs:
                return ZERO
            return reduce(Add, (mul(w, expect(mi, f)) for w, mi in pairs))
        case Bind(x, m1, m2):
            return expect(m1, Lam(x, expect(m2, f)))
        case If(c, a, b):
            return If(c, expect(a, f), expect(b, f))
        case App(Lam(x, body), arg):
            return expect(substitute(body, x, arg), f)
    raise Unsupported(f"expect has no rule for {type(m).__name__}")


def total_mass(m: Expr) -> Expr:
    return expect(m, Lam(fresh("x"), ONE))
