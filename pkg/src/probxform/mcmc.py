"""Metropolis-Hastings and Gibbs transformations.

Both build transition-kernel programs symbolically; no random choices are made
here.  The MH kernel maps a state to a measure over ``(proposal, ratio)``
pairs and the Gibbs kernel maps a state to a measure over states.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .disintegrate import density, disintegrate, reduce_proj
from .errors import TransformError, Unsupported
from .ir import (
    App, Bind, Div, Expr, Fst, Lam, Lit, Mul, Pair, Snd, Superpose, UnitLit, Var, Weight,
    dirac, fresh, substitute,
)
from .normalize import drop_constant_factors, normalize
from .typecheck import MeasureT, Type, infer_free


@dataclass(frozen=True)
class KernelProgram:
    expr: Expr
    state_type: Type | None
    kind: str = "mh"


def _state_type(target: Expr) -> Type | None:
    try:
        t, _ = infer_free(target)
    except Exception:
        return None
    return t.of if isinstance(t, MeasureT) else None


def _density(m: Expr, at: Expr, what: str) -> Expr:
    try:
        return density(m, at)
    except TransformError as err:
        raise type(err)(f"density of {what}: {err}") from err


def mh(proposal: Expr, target: Expr) -> KernelProgram:
    """Kernel ``Lam(old, new <~ proposal(old); Dirac((new, ratio)))``."""
    old, new = fresh("old"), fresh("new")
    vo, vn = Var(old), Var(new)
    p_new = _density(target, vn, "the target at the proposed state")
    p_old = _density(target, vo, "the target at the current state")
    q_old_new = _density(App(proposal, vn), vo, "the reverse proposal")
    q_new_old = _density(App(proposal, vo), vn, "the forward proposal")
    ratio = Div(Mul(p_new, q_old_new), Mul(p_old, q_new_old))
    body = Bind(new, App(proposal, vo), dirac(Pair(vn, ratio)))
    return KernelProgram(Lam(old, body), _state_type(target), "mh")


# -- Gibbs ------------------------------------------------------------------

def _outcome(m: Expr) -> Expr:
    """The final point of a Bind chain ending in ``Weight``."""
    while isinstance(m, Bind):
        m = m.body
    if isinstance(m, Weight):
        return m.point
    raise Unsupported("gibbs needs a Bind chain ending in Dirac or Weight")


def _paths(point: Expr, here: tuple = ()):
    """(path, leaf) for every scalar leaf of a tuple, left to right."""
    if isinstance(point, Pair):
        yield from _paths(point.fst, here + (0,))
        yield from _paths(point.snd, here + (1,))
    elif not isinstance(point, UnitLit):
        yield here, point


def _project(e: Expr, path: tuple) -> Expr:
    for step in path:
        e = Fst(e) if step == 0 else Snd(e)
    return e


def _rebuild(point: Expr, here: tuple, fill) -> Expr:
    if isinstance(point, Pair):
        return Pair(_rebuild(point.fst, here + (0,), fill), _rebuild(point.snd, here + (1,), fill))
    return fill(here, point)


def _tuple(items: list[Expr]) -> Expr:
    out = items[-1]
    for it in reversed(items[:-1]):
        out = Pair(it, out)
    return out


def gibbs(target: Expr) -> KernelProgram:
    """Random-scan Gibbs kernel over the scalar leaves of the target's outcome."""
    point = _outcome(target)
    leaves = list(_paths(point))
    if len(leaves) < 2:
        raise Unsupported("gibbs needs at least two coordinates")
    x = fresh("x")
    s = fresh("s")
    n = len(leaves)
    choices = []
    for i, (path_i, _) in enumerate(leaves):
        others = [p for j, (p, _) in enumerate(leaves) if j != i]
        try:
            pair_prog = Bind(s, target, dirac(Pair(_tuple([_project(Var(s), p) for p in others]),
                                                   _project(Var(s), path_i))))
            d = disintegrate(pair_prog)
            sliced = substitute(d.body, d.var, _tuple([_project(Var(x), p) for p in others]))
            e4 = normalize(drop_constant_factors(reduce_proj(sliced)), context=target)
        except TransformError as err:
            raise type(err)(f"coordinate {i}: {err}") from err
        v = fresh("v")
        state = _rebuild(point, (), lambda here, leaf: Var(v) if here == path_i else _project(Var(x), here))
        choices.append((Lit(Fraction(1, n)), Bind(v, e4, dirac(state))))
    return KernelProgram(Lam(x, Superpose(tuple(choices))), _state_type(target), "gibbs")
