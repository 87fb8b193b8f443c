"""Observation, disintegration and density.

Disintegration works on a *prepared* form of the input: the measure is
flattened into a list of branches, each a chain of primitive binds followed by
a single ``Weight(w, (obs, lat))``.  ``Weight``/``Dirac`` binds are inlined and
``Superpose``/``If`` binds are distributed, so each branch is handled on its
own and the branches are recombined with ``Superpose``.

Each leaf of ``obs`` is matched against the corresponding projection of the
observed point.  A leaf that depends on exactly one random variable through an
invertible chain (identity, ``+c``, ``c*x``, negation, ``/c``, ``exp``,
``log``) is solved for that variable; the bind is removed and its density at
the solution, times the Jacobian, joins the final weight.  A leaf with no
random variables contributes an indicator (its base measure is counting
measure on that coordinate).  Anything else raises :class:`NotInvertible`.
"""

from __future__ import annotations

from dataclasses import dataclass

from .densities import ONE, ZERO, density_of, mul
from .errors import NotInvertible, NotPairMeasure, Unhandled, Unsupported
from .expect import expect
from .ir import (
    Add, And, App, Bind, Categorical, Div, Equal, Exp, Expr, Fst, If, Lam, Less, Lit, Log,
    Mul, Name, Neg, Pair, PRIMITIVES, Snd, Sub, Superpose, UnitLit, Var, Weight, children,
    fresh, free_vars, subst, substitute, with_children,
)


# -- small term utilities ---------------------------------------------------

def reduce_proj(e: Expr, memo: dict | None = None) -> Expr:
    """Contract ``Fst``/``Snd`` of literal pairs and applied lambdas."""
    if memo is None:
        memo = {}
    hit = memo.get(id(e))
    if hit is not None and hit[0] is e:
        return hit[1]
    out = e
    kids = children(e)
    if kids:
        out = with_children(e, (reduce_proj(k, memo) for k in kids))
    match out:
        case Fst(Pair(a, _)):
            out = a
        case Snd(Pair(_, b)):
            out = b
        case App(Lam(x, body), arg):
            out = reduce_proj(substitute(body, x, arg), memo)
    memo[id(e)] = (e, out)
    return out


def _scale(w: Expr, m: Expr) -> Expr:
    return m if w == ONE else Superpose(((w, m),))


# -- observation ------------------------------------------------------------

def observe(m: Expr, t: Expr) -> Expr:
    """Reweight the final draw of ``m`` to the point ``t`` by its density."""
    match m:
        case _ if isinstance(m, PRIMITIVES):
            return Weight(density_of(m, t), t)
        case Bind(x, m1, m2):
            if x in free_vars(t):
                y = fresh(x)
                m2 = substitute(m2, x, Var(y))
                x = y
            return Bind(x, m1, observe(m2, t))
        case Superpose(pairs):
            return Superpose(tuple((w, observe(mi, t)) for w, mi in pairs))
        case If(c, a, b):
            return If(c, observe(a, t), observe(b, t))
        case App(Lam(x, body), arg):
            return observe(substitute(body, x, arg), t)
        case Weight():
            raise Unhandled("observe cannot handle a Dirac or Weight ending")
    raise Unhandled(f"observe cannot handle {type(m).__name__}")


# -- preparation ------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    binds: tuple  # ((Name, primitive Expr), ...)
    weight: Expr
    point: Expr


def _rename(name: Name, taken) -> Name:
    return fresh(name) if name in taken else name


def branches(m: Expr, taken: frozenset | None = None) -> list[Branch]:
    """Flatten ``m`` into a sum of bind chains over primitives."""
    if taken is None:
        taken = free_vars(m)
    match m:
        case Weight(w, e):
            return [Branch((), w, reduce_proj(e))]
        case _ if isinstance(m, PRIMITIVES):
            z = fresh("z")
            return [Branch(((z, m),), ONE, Var(z))]
        case Superpose(pairs):
            out = []
            for wi, mi in pairs:
                for b in branches(mi, taken | free_vars(wi)):
                    out.append(Branch(b.binds, mul(wi, b.weight), b.point))
            return out
        case If(c, a, b):
            out = []
            for cond, arm in ((c, a), (_negate(c), b)):
                for br in branches(arm, taken | free_vars(c)):
                    out.append(Branch(br.binds, mul(If(cond, ONE, ZERO), br.weight), br.point))
            return out
        case Bind(x, m1, m2):
            if isinstance(m1, PRIMITIVES):
                x2 = _rename(x, taken)
                if x2 != x:
                    m2 = substitute(m2, x, Var(x2))
                return [Branch(((x2, m1),) + b.binds, b.weight, b.point)
                        for b in branches(m2, taken | {x2})]
            out = []
            for b1 in branches(m1, taken | (free_vars(m2) - {x})):
                names = frozenset(n for n, _ in b1.binds)
                m2b = substitute(m2, x, b1.point)
                for b2 in branches(m2b, taken | names | free_vars(b1.weight)):
                    out.append(Branch(b1.binds + b2.binds, mul(b1.weight, b2.weight), b2.point))
            return out
        case App(Lam(x, body), arg):
            return branches(substitute(body, x, arg), taken)
    raise Unsupported(f"cannot disintegrate through {type(m).__name__}")


def _negate(c: Expr) -> Expr:
    from .ir import Not
    return Not(c)


# -- inversion --------------------------------------------------------------

def _abs_recip(c: Expr) -> Expr:
    """|1/c| for a constant expression c."""
    if isinstance(c, Lit):
        return Lit(abs(1 / c.value))
    inv = Div(ONE, c)
    return If(Less(ZERO, c), inv, Neg(inv))


def _abs(c: Expr) -> Expr:
    if isinstance(c, Lit):
        return Lit(abs(c.value))
    return If(Less(ZERO, c), c, Neg(c))


def invert(leaf: Expr, x: Name, target: Expr):
    """Solve ``leaf == target`` for ``x``.

    Returns ``(solution, jacobian_factors, guards)`` where the Jacobian factors
    multiply to |dx/dtarget| and the guards must hold for a solution to exist.
    """
    def has(e):
        return x in free_vars(e)

    match leaf:
        case Var(y) if y == x:
            return target, [], []
        case Add(a, b):
            if has(a) and not has(b):
                return invert(a, x, Sub(target, b))
            if has(b) and not has(a):
                return invert(b, x, Sub(target, a))
        case Sub(a, b):
            if has(a) and not has(b):
                return invert(a, x, Add(target, b))
            if has(b) and not has(a):
                return invert(b, x, Sub(a, target))
        case Neg(a):
            return invert(a, x, Neg(target))
        case Mul(a, b):
            if has(b) and not has(a):
                sol, jac, guards = invert(b, x, Div(target, a))
                return sol, jac + [_abs_recip(a)], guards
            if has(a) and not has(b):
                sol, jac, guards = invert(a, x, Div(target, b))
                return sol, jac + [_abs_recip(b)], guards
        case Div(a, b):
            if has(a) and not has(b):
                sol, jac, guards = invert(a, x, Mul(target, b))
                return sol, jac + [_abs(b)], guards
        case Exp(a):
            sol, jac, guards = invert(a, x, Log(target))
            return sol, jac + [Div(ONE, target)], guards + [Less(ZERO, target)]
        case Log(a):
            sol, jac, guards = invert(a, x, Exp(target))
            return sol, jac + [Exp(target)], guards
    raise NotInvertible(f"cannot invert {_show(leaf)} for {x}")


def _show(e):
    from .syntax import pretty
    return pretty(e)


# -- disintegration ---------------------------------------------------------

def _leaves(obs: Expr, target: Expr):
    if isinstance(obs, Pair):
        yield from _leaves(obs.fst, Fst(target) if not isinstance(target, Pair) else target.fst)
        yield from _leaves(obs.snd, Snd(target) if not isinstance(target, Pair) else target.snd)
    else:
        yield obs, target


def _join(new: Expr, acc: Expr | None) -> Expr:
    if acc is None:
        return new
    if isinstance(acc, If) and acc.orelse == ZERO and isinstance(acc.then, Div) and acc.then.left == ONE:
        return If(acc.cond, Div(new, acc.then.right), ZERO)
    return Mul(new, acc)


def _disintegrate_branch(br: Branch, o: Expr) -> Expr:
    point = br.point
    if not isinstance(point, Pair):
        raise NotPairMeasure("disintegration needs a measure over pairs")
    binds = list(br.binds)
    weight, lat = br.weight, point.snd
    leaves = list(_leaves(point.fst, o))
    acc = None
    for i in range(len(leaves)):
        leaf, target = leaves[i]
        if isinstance(leaf, UnitLit):
            continue
        bound = {n: j for j, (n, _) in enumerate(binds)}
        random = [n for n in free_vars(leaf) if n in bound]
        if not random:
            acc = _join(If(Equal(target, leaf), ONE, ZERO), acc)
            continue
        if len(random) > 1:
            raise NotInvertible(f"observed component {_show(leaf)} mixes several random variables")
        x = random[0]
        j = bound[x]
        d = binds[j][1]
        sol, jac, guards = invert(leaf, x, target)
        factor = density_of(d, sol)
        if not isinstance(d, Categorical):
            for f in jac:
                factor = Mul(factor, f)
        for g in reversed(guards):
            factor = If(g, factor, ZERO)
        acc = _join(factor, acc)
        del binds[j]
        sigma = {x: sol}
        binds = [(n, subst(r, sigma)) if k >= j else (n, r) for k, (n, r) in enumerate(binds)]
        weight, lat, acc = subst(weight, sigma), subst(lat, sigma), subst(acc, sigma)
        leaves = leaves[:i + 1] + [(subst(lf, sigma), t) for lf, t in leaves[i + 1:]]
    body = Weight(weight if acc is None else mul(acc, weight), lat)
    for n, r in reversed(binds):
        body = Bind(n, r, body)
    return body


def disintegrate(m: Expr, obs_name: str = "o") -> Lam:
    """Turn a measure over pairs into a function from the first component to
    the unnormalized measure over the second."""
    o = fresh(obs_name)
    parts = [_disintegrate_branch(b, Var(o)) for b in branches(m, free_vars(m) | {o})]
    if len(parts) == 1:
        return Lam(o, parts[0])
    return Lam(o, Superpose(tuple((ONE, p) for p in parts)))


def density(m: Expr, t: Expr) -> Expr:
    """Density of ``m`` at ``t`` with respect to its base measure."""
    p = fresh("p")
    wrapped = Bind(p, m, Weight(ONE, Pair(Var(p), UnitLit())))
    lam = disintegrate(wrapped)
    y = fresh("y")
    return reduce_proj(expect(App(lam, t), Lam(y, ONE)))
