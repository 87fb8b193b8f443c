"""Normalization and conditioning."""

from __future__ import annotations

from .densities import ONE
from .disintegrate import disintegrate
from .errors import ZeroMass
from .expect import total_mass
from .ir import App, Bind, Div, Expr, Lam, Mul, Var, Weight, free_vars, fresh, lit
from .simplify import simplify


def _factors(w: Expr):
    if isinstance(w, Mul):
        yield from _factors(w.left)
        yield from _factors(w.right)
    else:
        yield w


def drop_constant_factors(m: Expr) -> Expr:
    """Remove weight factors that do not mention any bound variable.

    Such factors scale the whole measure, so normalizing cancels them anyway.
    Only a plain Bind chain ending in ``Weight`` is rewritten.
    """
    chain, bound = [], set()
    while isinstance(m, Bind):
        chain.append((m.var, m.rhs))
        bound.add(m.var)
        m = m.body
    if not isinstance(m, Weight):
        return _rebuild(chain, m)
    keep = [f for f in _factors(m.weight) if free_vars(f) & bound]
    w = ONE
    for f in keep:
        w = f if w is ONE else Mul(w, f)
    return _rebuild(chain, Weight(w, m.point))


def _rebuild(chain, body):
    for x, rhs in reversed(chain):
        body = Bind(x, rhs, body)
    return body


def normalize(m: Expr, context: Expr | None = None) -> Expr:
    """Rescale ``m`` to total mass one.

    The mass expression is simplified first (``context`` supplies extra
    positivity facts); if it stays symbolic the sampler falls back to
    quadrature when the program runs.
    """
    e1 = simplify(total_mass(m), context=m if context is None else context)
    if e1 == lit(0):
        raise ZeroMass("measure has total mass zero")
    x = fresh("x")
    return Bind(x, m, Weight(Div(ONE, e1), Var(x)))


def condition(m: Expr, obs_name: str = "o") -> Lam:
    """Conditional distribution of the second component given the first."""
    d = disintegrate(m, obs_name)
    return Lam(d.var, normalize(drop_constant_factors(d.body), context=m))
