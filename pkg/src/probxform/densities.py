"""Density table for the primitive distributions.

Each entry builds an Expr for the density of a primitive at a point, with
respect to Lebesgue measure (continuous primitives) or counting measure
(``Categorical``).  The forms are fixed so that golden outputs are stable:

* ``Uniform(a, b)`` at t: ``If(a<t<b, 1/(b-a), 0)``
* ``Normal(mu, sd)`` at t: ``exp(-(t-mu)^2/(2*sd^2))/sd/sqrt(2*pi)``
* ``Gamma(k, theta)`` at t: ``If(0<t, t^(k-1)*exp(-t/theta)/(gamma(k)*theta^k), 0)``
* ``Beta(a, b)`` at t: ``If(0<t<1, t^(a-1)*(1-t)^(b-1)*gamma(a+b)/(gamma(a)*gamma(b)), 0)``
* ``Categorical((w1, v1), ...)`` at t: ``(If(t==v1, w1, 0) + ...)/(w1 + ...)``
"""

from __future__ import annotations

from functools import reduce

from .errors import Unsupported
from .ir import (
    Add, And, Beta, Categorical, Const, Div, Equal, Exp, Expr, Gamma, GammaFn, If, Less,
    Lit, Mul, Neg, Normal, Pow, Sqrt, Sub, Uniform, lit,
)

ZERO, ONE, TWO = lit(0), lit(1), lit(2)


def support(d: Expr) -> tuple[Expr, Expr]:
    """Integration bounds covering the support of a continuous primitive."""
    match d:
        case Uniform(a, b):
            return a, b
        case Normal():
            return Neg(Const("inf")), Const("inf")
        case Gamma():
            return ZERO, Const("inf")
        case Beta():
            return ZERO, ONE
    raise Unsupported(f"no support for {type(d).__name__}")


def uniform_density(a: Expr, b: Expr, t: Expr) -> Expr:
    return If(And(Less(a, t), Less(t, b)), Div(ONE, Sub(b, a)), ZERO)


def normal_density(mu: Expr, sd: Expr, t: Expr) -> Expr:
    kernel = Exp(Div(Neg(Pow(Sub(t, mu), TWO)), Mul(TWO, Pow(sd, TWO))))
    return Div(Div(kernel, sd), Sqrt(Mul(TWO, Const("pi"))))


def gamma_density(k: Expr, theta: Expr, t: Expr) -> Expr:
    body = Div(Mul(Pow(t, Sub(k, ONE)), Exp(Neg(Div(t, theta)))),
               Mul(GammaFn(k), Pow(theta, k)))
    return If(Less(ZERO, t), body, ZERO)


def beta_density(a: Expr, b: Expr, t: Expr) -> Expr:
    body = Div(Mul(Mul(Pow(t, Sub(a, ONE)), Pow(Sub(ONE, t), Sub(b, ONE))), GammaFn(Add(a, b))),
               Mul(GammaFn(a), GammaFn(b)))
    return If(And(Less(ZERO, t), Less(t, ONE)), body, ZERO)


def categorical_density(pairs, t: Expr) -> Expr:
    if not pairs:
        raise Unsupported("empty Categorical has no density")
    num = reduce(Add, (If(Equal(t, v), w, ZERO) for w, v in pairs))
    den = reduce(Add, (w for w, _ in pairs))
    return Div(num, den)


def density_of(d: Expr, t: Expr) -> Expr:
    """Density of primitive ``d`` at the point ``t``."""
    match d:
        case Uniform(a, b):
            return uniform_density(a, b, t)
        case Normal(mu, sd):
            return normal_density(mu, sd, t)
        case Gamma(k, th):
            return gamma_density(k, th, t)
        case Beta(a, b):
            return beta_density(a, b, t)
        case Categorical(pairs):
            return categorical_density(pairs, t)
    raise Unsupported(f"{type(d).__name__} is not a primitive distribution")


def mul(a: Expr, b: Expr) -> Expr:
    """Product that drops literal unit factors."""
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Mul(a, b)
