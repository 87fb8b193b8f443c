"""Measure-preserving simplification.

The rewriter works innermost first.  Real-valued subterms are put in the
canonical form of :mod:`probxform.algebra` and printed back; measure terms are
rewritten with a fixed rule set:

======================  =====================================================
rule                    effect
======================  =====================================================
``algebra``             canonicalise a real or boolean subterm
``beta``                ``App(Lam(x, b), a)`` to ``b[x:=a]``
``proj``                ``Fst((a, b))`` to ``a`` and ``Snd((a, b))`` to ``b``
``int-closed-form``     Gaussian, Gamma, Beta and polynomial integrals
``bind-assoc``          ``x <~ (y <~ a; b); c`` to ``y <~ a; x <~ b; c``
``bind-dirac``          ``x <~ Weight(w, e); m`` to ``m[x:=e]`` scaled by w
``bind-superpose``      distribute a bind over a ``Superpose``
``bind-if``             distribute a bind over a measure-valued ``If``
``bind-right-id``       ``x <~ m; Dirac(x)`` to ``m``
``drop-unused``         drop ``x <~ p`` for a primitive p when x is unused
``integrate-out``       eliminate a latent variable absent from the outcome
``normal-convolution``  ``x <~ Normal(a,s); Normal(c*x+d, t)`` in closed form
``conjugacy``           ``x <~ p; Weight(w, x)`` recognised as a primitive
``weight-zero``         ``Weight(0, e)`` to the zero measure
``superpose-flatten``   nested ``Superpose`` flattened
``superpose-drop``      zero-weight branches dropped
``superpose-single``    ``Superpose((1, m))`` to m
``if-const``            ``If`` with a constant condition
======================  =====================================================

Each application counts against a step budget so rewriting always stops.
"""

from __future__ import annotations

import sys

import json
from dataclasses import dataclass, field

from . import algebra as A
from .densities import density_of
from .ir import (
    Add, And, App, Beta, Bind, BoolLit, Categorical, Const, Div, Equal, Expr, Fst, Gamma,
    If, Int, Lam, Less, Lit, MEASURE_FORMS, Mul, Name, Neg, Normal, Not, Pair, PRIMITIVES,
    Snd, Sqrt, Sum, Superpose, Uniform, Var, Weight, alpha_equal, children, fresh,
    free_vars, is_inf, lit, substitute, walk, with_children,
)

DEFAULT_BUDGET = 10_000

RULES = (
    "algebra", "beta", "proj", "int-closed-form", "bind-assoc", "bind-dirac",
    "bind-superpose", "bind-if", "bind-right-id", "drop-unused", "integrate-out",
    "normal-convolution", "conjugacy", "weight-zero", "superpose-flatten",
    "superpose-drop", "superpose-single", "if-const",
)

_ARITH = A.ARITH + (Int, Sum)
_ONE = lit(1)
ZERO_MEASURE = Superpose(())


@dataclass
class RewriteTrace:
    steps: list = field(default_factory=list)

    def record(self, rule: str, before: Expr, after: Expr):
        self.steps.append((rule, before, after))

    def __len__(self):
        return len(self.steps)

    def rules(self) -> list[str]:
        return [r for r, _, _ in self.steps]

    def to_json(self) -> str:
        from .syntax import pretty
        return json.dumps([{"rule": r, "before": pretty(b), "after": pretty(a)}
                           for r, b, a in self.steps], indent=1)

    def replay(self, e: Expr) -> Expr:
        """Apply the recorded steps to ``e`` by subterm replacement."""
        for _, before, after in self.steps:
            e = _replace_first(e, before, after)
        return e


def _replace_first(e: Expr, old: Expr, new: Expr) -> Expr:
    done = [False]

    def go(t):
        if done[0]:
            return t
        kids = children(t)
        if kids:
            nk = tuple(go(k) for k in kids)
            if done[0]:
                return with_children(t, nk)
        if t == old:
            done[0] = True
            return new
        return t
    out = go(e)
    return out if done[0] else e


def _kind(e: Expr) -> str:
    if isinstance(e, MEASURE_FORMS):
        return "measure"
    if isinstance(e, _ARITH):
        return "real"
    if isinstance(e, A.BOOL):
        return "bool"
    if isinstance(e, If):
        kinds = {_kind(e.then), _kind(e.orelse)}
        for k in ("measure", "real", "bool"):
            if k in kinds:
                return k
    return "other"


# unrolled models nest tuples and products deeply
RECURSION_LIMIT = 20000


class _Budget(Exception):
    pass


class Simplifier:
    def __init__(self, trace: RewriteTrace | None = None, budget: int = DEFAULT_BUDGET):
        self.trace = trace
        self.budget = budget
        self.steps = 0
        self.canon = A.Canon(leaf=self._leaf)

    # -- bookkeeping ----------------------------------------------------

    def fire(self, rule: str, before: Expr, after: Expr) -> Expr:
        self.steps += 1
        if self.trace is not None:
            self.trace.record(rule, before, after)
        return after

    @property
    def exhausted(self) -> bool:
        return self.steps >= self.budget

    # -- entry points -------------------------------------------------------

    def run(self, e: Expr, context: Expr | None = None) -> Expr:
        facts = initial_facts(e if context is None else Pair(e, context))
        with A.assuming(facts), A.factor_pool():
            return self.simp(e)

    def simp(self, e: Expr) -> Expr:
        k = _kind(e)
        if k == "measure":
            return self.measure(e)
        if k == "real":
            return self.real(e)
        if k == "bool":
            return self.boolean(e)
        match e:
            case Lam(x, body):
                return Lam(x, self.simp(body))
            case App(f, a):
                f2, a2 = self.simp(f), self.simp(a)
                if isinstance(f2, Lam) and not self.exhausted:
                    out = substitute(f2.body, f2.var, a2)
                    self.fire("beta", App(f2, a2), out)
                    return self.simp(out)
                return App(f2, a2)
            case Pair(a, b):
                return Pair(self.simp(a), self.simp(b))
            case Fst(a) | Snd(a):
                a2 = self.simp(a)
                if isinstance(a2, Pair):
                    out = a2.fst if isinstance(e, Fst) else a2.snd
                    return self.fire("proj", type(e)(a2), out)
                return type(e)(a2)
            case If(c, a, b):
                c2 = self.boolean(c)
                if isinstance(c2, BoolLit):
                    out = a if c2.value else b
                    self.fire("if-const", If(c2, a, b), out)
                    return self.simp(out)
                return If(c2, self.simp(a), self.simp(b))
        return e

    # -- reals and booleans ---------------------------------------------------

    def real(self, e: Expr) -> Expr:
        try:
            out = A.to_expr(self.canon(e))
        except (A.NotArithmetic, A.TooBig, ZeroDivisionError, OverflowError, RecursionError):
            out = self._structural(e)
        if out != e and not alpha_equal(out, e):
            self.fire("algebra", e, out)
            return out
        return e

    def boolean(self, e: Expr) -> Expr:
        try:
            out = A.bool_expr(self.canon.cond(e))
        except (A.NotArithmetic, A.TooBig, ZeroDivisionError, OverflowError, RecursionError):
            out = None
        if out is None:
            out = self._structural(e)
        if out != e and not alpha_equal(out, e):
            self.fire("algebra", e, out)
            return out
        return e

    def _structural(self, e: Expr) -> Expr:
        if isinstance(e, (Int, Sum)):
            return type(e)(self.simp(e.lo), self.simp(e.hi), e.var, self.simp(e.body))
        kids = children(e)
        if not kids:
            return e
        return with_children(e, (self.simp(k) for k in kids))

    def _leaf(self, e: Expr) -> Expr:
        if isinstance(e, Int):
            return self._int(e)
        if isinstance(e, Sum):
            return self._structural(e)
        if isinstance(e, (App, Fst, Snd, If)):
            return self.simp(e)
        return e

    def _bound(self, e: Expr, sign: int):
        if is_inf(e, sign):
            return A.INF
        return self.canon(e)

    def _int(self, e: Int) -> Expr:
        x = e.var
        lo, hi = self._bound(e.lo, -1), self._bound(e.hi, 1)
        facts = A.current_facts().with_continuous(x)
        vx = A.var(x)
        if lo is not A.INF:
            facts = facts.with_lt(A.sub(vx, lo))
            if A.is_nonneg(lo) or lo.is_zero():
                facts = facts.with_positive(A.VarA(x))
        if hi is not A.INF:
            facts = facts.with_lt(A.sub(hi, vx))
        with A.assuming(facts):
            body = self.canon(e.body)
            res = A.integrate(body, x, lo, hi)
            body_e = A.to_expr(body)
        if res is not None:
            return self.fire("int-closed-form", e, A.to_expr(res))
        lo_e = e.lo if lo is A.INF else A.to_expr(lo)
        hi_e = e.hi if hi is A.INF else A.to_expr(hi)
        return Int(lo_e, hi_e, x, body_e)

    # -- measures ------------------------------------------------------------------

    def measure(self, m: Expr) -> Expr:
        match m:
            case Bind(x, m1, m2):
                return self.bind(x, m1, m2)
            case Weight(w, e):
                w2 = self.real(w)
                if w2 == lit(0):
                    return self.fire("weight-zero", Weight(w2, e), ZERO_MEASURE)
                return Weight(w2, self.simp(e))
            case Superpose(pairs):
                return self.superpose(pairs)
            case Categorical(pairs):
                out = []
                for w, v in pairs:
                    w2 = self.real(w)
                    if w2 != lit(0):
                        out.append((w2, self.simp(v)))
                return Categorical(tuple(out)) if out else m
            case _ if isinstance(m, PRIMITIVES):
                return with_children(m, (self.real(k) for k in children(m)))
            case If(c, a, b):
                c2 = self.boolean(c)
                if isinstance(c2, BoolLit):
                    out = a if c2.value else b
                    self.fire("if-const", If(c2, a, b), out)
                    return self.simp(out)
                return If(c2, self.simp(a), self.simp(b))
        return self.simp(m)

    def superpose(self, pairs) -> Expr:
        items = []
        for w, mi in pairs:
            w2 = self.real(w)
            if w2 == lit(0):
                self.fire("superpose-drop", Superpose(((w2, mi),)), ZERO_MEASURE)
                continue
            m2 = self.simp(mi)
            if isinstance(m2, Superpose):
                if m2.pairs:
                    flat = tuple((self.real(Mul(w2, v)), mj) for v, mj in m2.pairs)
                    self.fire("superpose-flatten", Superpose(((w2, m2),)), Superpose(flat))
                    items.extend(p for p in flat if p[0] != lit(0))
                continue
            if isinstance(m2, Weight) and m2.weight != _ONE:
                w3 = self.real(Mul(w2, m2.weight))
                self.fire("superpose-flatten", Superpose(((w2, m2),)),
                          Superpose(((w3, Weight(_ONE, m2.point)),)))
                w2, m2 = w3, Weight(_ONE, m2.point)
            items.append((w2, m2))
        if not items:
            return ZERO_MEASURE
        if len(items) == 1 and not self.exhausted:
            w, mi = items[0]
            if w == _ONE:
                return self.fire("superpose-single", Superpose(tuple(items)), mi)
            if isinstance(mi, Weight):
                return self.fire("superpose-single", Superpose(tuple(items)), Weight(w, mi.point))
        return Superpose(tuple(items))

    def scale(self, w: Expr, m: Expr) -> Expr:
        if w == _ONE:
            return m
        match m:
            case Weight(v, e):
                return Weight(Mul(w, v), e)
            case Bind(y, a, b):
                if y in free_vars(w):
                    y2 = fresh(y)
                    b = substitute(b, y, Var(y2))
                    y = y2
                return Bind(y, a, self.scale(w, b))
            case Superpose(pairs):
                return Superpose(tuple((Mul(w, wi), mi) for wi, mi in pairs))
            case If(c, a, b):
                return If(c, self.scale(w, a), self.scale(w, b))
            case _ if isinstance(m, PRIMITIVES):
                z = fresh("z")
                return Bind(z, m, Weight(w, Var(z)))
        return Superpose(((w, m),))

    def bind(self, x: Name, m1: Expr, m2: Expr) -> Expr:
        m1 = self.simp(m1)
        if not self.exhausted:
            match m1:
                case Bind(y, a, b):
                    if y in free_vars(m2) or y == x:
                        y2 = fresh(y)
                        b = substitute(b, y, Var(y2))
                        y = y2
                    out = Bind(y, a, Bind(x, b, m2))
                    self.fire("bind-assoc", Bind(x, m1, m2), out)
                    return self.measure(out)
                case Weight(w, e):
                    out = self.scale(w, substitute(m2, x, e))
                    self.fire("bind-dirac", Bind(x, m1, m2), out)
                    return self.measure(out)
                case Superpose(pairs):
                    out = Superpose(tuple((w, Bind(x, mi, m2)) for w, mi in pairs))
                    self.fire("bind-superpose", Bind(x, m1, m2), out)
                    return self.measure(out)
                case If(c, a, b) if _kind(m1) == "measure":
                    out = If(c, Bind(x, a, m2), Bind(x, b, m2))
                    self.fire("bind-if", Bind(x, m1, m2), out)
                    return self.measure(out)
        with A.assuming(var_facts(x, m1, self.canon)):
            m2 = self.simp(m2)
            if self.exhausted:
                return Bind(x, m1, m2)
            here = Bind(x, m1, m2)
            if isinstance(m2, Weight) and m2.point == Var(x) and m2.weight == _ONE:
                return self.fire("bind-right-id", here, m1)
            if x not in free_vars(m2) and isinstance(m1, PRIMITIVES):
                return self.fire("drop-unused", here, m2)
            out = self._normal_convolution(x, m1, m2)
            if out is not None:
                self.fire("normal-convolution", here, out)
                return self.measure(out)
            if isinstance(m2, Weight) and m2.point == Var(x) and x in free_vars(m2.weight):
                out = self._recognize(x, m1, m2.weight)
                if out is not None:
                    self.fire("conjugacy", here, out)
                    return self.measure(out)
            if isinstance(m1, PRIMITIVES):
                out = self._integrate_out(x, m1, m2)
                if out is not None:
                    self.fire("integrate-out", here, out)
                    return self.measure(out)
        return Bind(x, m1, m2)

    # -- latent variable elimination -----------------------------------------

    def _normal_convolution(self, x: Name, m1: Expr, m2: Expr):
        if not isinstance(m1, Normal):
            return None
        if isinstance(m2, Bind) and isinstance(m2.rhs, Normal) and x not in free_vars(m2.body):
            inner = self._normal_convolution(x, m1, m2.rhs)
            return None if inner is None else Bind(m2.var, inner, m2.body)
        if not isinstance(m2, Normal) or x in free_vars(m2.sd) or x not in free_vars(m2.mean):
            return None
        try:
            co = A.coeffs_in(self.canon(m2.mean), x)
            if co is None or max(co) != 1:
                return None
            alpha, beta = co[1], co.get(0, A.ZERO)
            mean = A.add(A.mul(alpha, self.canon(m1.mean)), beta)
            var = A.add(A.mul(A.power(alpha, 2), A.power(self.canon(m1.sd), 2)),
                        A.power(self.canon(m2.sd), 2))
            sd = A.power(var, A.Q(1, 2))
            return Normal(A.to_expr(mean), A.to_expr(sd))
        except (A.NotArithmetic, A.TooBig, ZeroDivisionError):
            return None

    def _integrate_out(self, x: Name, d: Expr, m2: Expr):
        match m2:
            case Weight(w, e) if x not in free_vars(e) and x in free_vars(w):
                k = self._mass(x, d, w)
                return None if k is None else Weight(k, e)
            case Bind(y, r, rest) if x not in free_vars(r):
                inner = self._integrate_out(x, d, rest)
                return None if inner is None else Bind(y, r, inner)
        return None

    def _mass(self, x: Name, d: Expr, w: Expr):
        """Closed form of the integral of ``w`` against ``d`` over x, or None."""
        try:
            if isinstance(d, Categorical):
                num = A.add_all(A.mul(self.canon(p), self.canon(substitute(w, x, v)))
                                for p, v in d.pairs)
                den = A.add_all(self.canon(p) for p, _ in d.pairs)
                return A.to_expr(A.mul(num, A.reciprocal(den)))
            lo, hi = self._support(d)
            body = self.canon(Mul(density_of(d, Var(x)), w))
            res = A.integrate(body, x, lo, hi)
            return None if res is None else A.to_expr(res)
        except (A.NotArithmetic, A.TooBig, ZeroDivisionError):
            return None

    def _support(self, d: Expr):
        match d:
            case Uniform(a, b):
                return self.canon(a), self.canon(b)
            case Normal():
                return A.INF, A.INF
            case Gamma():
                return A.ZERO, A.INF
            case Beta():
                return A.ZERO, A.ONE
        raise A.NotArithmetic("no support")

    # -- conjugacy ---------------------------------------------------------------

    def _recognize(self, x: Name, d: Expr, w: Expr):
        try:
            if isinstance(d, Categorical):
                return self._recognize_categorical(x, d, w)
            if not isinstance(d, (Normal, Gamma, Beta)):
                return None
            p = self.canon(Mul(density_of(d, Var(x)), w))
            sg = p.single()
            if sg is None:
                return None
            dep, _ = A.split_mono(sg[1], x)
            px, q, p1, others, _ = A._kernel_parts(dep, x)
            if others or q is None and isinstance(d, Normal):
                return None
            lo, hi = self._support(d)
            if isinstance(d, Normal):
                if px.terms or p1.terms:
                    return None
                co = A.coeffs_in(q, x)
                if co is None or max(co) != 2:
                    return None
                a, b = co[2], co.get(1, A.ZERO)
                if not A.is_positive(A.neg(a)):
                    return None
                mean = A.mul(A.neg(b), A.reciprocal(A.scale(a, 2)))
                sd = A.power(A.neg(A.scale(a, 2)), A.Q(-1, 2))
                new = Normal(A.to_expr(mean), A.to_expr(sd))
            elif isinstance(d, Gamma):
                if p1.terms:
                    return None
                lx, rest = (A.ZERO, A.ZERO) if q is None else A._log_coeff(q, A.var(x))
                co = A.coeffs_in(rest, x)
                if co is None or max(co, default=0) != 1:
                    return None
                nb = A.neg(co[1])
                if not A.is_positive(nb):
                    return None
                shape = A.add(A.add(px, lx), A.ONE)
                new = Gamma(A.to_expr(shape), A.to_expr(A.reciprocal(nb)))
            else:
                lx = lx1 = A.ZERO
                if q is not None:
                    lx, q = A._log_coeff(q, A.var(x))
                    one_minus = A.sub(A.ONE, A.var(x))
                    lx1, q = A._log_coeff(q, one_minus)
                    if q.terms and x in q.fv:
                        return None
                new = Beta(A.to_expr(A.add(A.add(px, lx), A.ONE)),
                           A.to_expr(A.add(A.add(p1, lx1), A.ONE)))
            k = A.integrate(p, x, lo, hi)
            if k is None:
                return None
        except (A.NotArithmetic, A.TooBig, ZeroDivisionError):
            return None
        if k == A.ONE:
            return new
        return Bind(x, new, Weight(A.to_expr(k), Var(x)))

    def _recognize_categorical(self, x: Name, d: Categorical, w: Expr):
        pairs = []
        for p, v in d.pairs:
            pw = A.mul(self.canon(p), self.canon(substitute(w, x, v)))
            if not pw.is_zero():
                pairs.append((pw, v))
        if not pairs:
            return ZERO_MEASURE
        total = A.add_all(pw for pw, _ in pairs)
        base = A.add_all(self.canon(p) for p, _ in d.pairs)
        k = A.mul(total, A.reciprocal(base))
        # keep the new weights in lowest terms relative to the total
        inv = A.reciprocal(total)
        new = Categorical(tuple((A.to_expr(A.mul(pw, inv)), v) for pw, v in pairs))
        if k == A.ONE:
            return new
        return Bind(x, new, Weight(A.to_expr(k), Var(x)))


# -- facts -----------------------------------------------------------------------

def _register(facts: A.Facts, p: A.Poly) -> A.Facts:
    sg = p.single()
    if sg is not None and sg[0] > 0 and len(sg[1]) == 1 and sg[1][0][1] == 1:
        return facts.with_positive(sg[1][0][0])
    return facts.with_lt(p)


def initial_facts(e: Expr) -> A.Facts:
    """Positivity of distribution parameters and Uniform widths in ``e``."""
    facts = A.Facts()
    canon = A.Canon()
    for t in walk(e):
        try:
            match t:
                case Normal(_, sd):
                    facts = _register(facts, canon(sd))
                case Gamma(k, th):
                    facts = _register(_register(facts, canon(k)), canon(th))
                case Beta(a, b):
                    facts = _register(_register(facts, canon(a)), canon(b))
                case Uniform(lo, hi):
                    facts = facts.with_lt(A.sub(canon(hi), canon(lo)))
        except (A.NotArithmetic, A.TooBig, ZeroDivisionError):
            continue
    return facts


def var_facts(x: Name, d: Expr, canon) -> A.Facts:
    """Facts that hold for a variable drawn from the primitive ``d``."""
    f = A.current_facts()
    vx = A.var(x)
    try:
        match d:
            case Uniform(lo, hi):
                plo, phi = canon(lo), canon(hi)
                f = f.with_continuous(x).with_lt(A.sub(vx, plo), A.sub(phi, vx))
                if plo.is_zero() or A.is_nonneg(plo):
                    f = f.with_positive(A.VarA(x))
            case Normal():
                f = f.with_continuous(x)
            case Gamma():
                f = f.with_continuous(x).with_positive(A.VarA(x))
            case Beta():
                f = f.with_continuous(x).with_positive(A.VarA(x)).with_lt(A.sub(A.ONE, vx))
    except (A.NotArithmetic, A.TooBig, ZeroDivisionError):
        pass
    return f


# -- public API ---------------------------------------------------------------------

def simplify(e: Expr, trace: RewriteTrace | None = None, budget: int = DEFAULT_BUDGET,
             context: Expr | None = None) -> Expr:
    """Simplify ``e`` without changing the measure or value it denotes.

    Parameters of distributions in ``e`` (and in ``context``, typically the
    program ``e`` was derived from) are assumed positive.
    """
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, RECURSION_LIMIT))
    try:
        return Simplifier(trace, budget).run(e, context)
    except RecursionError:
        return e
    finally:
        sys.setrecursionlimit(limit)


def simplify_with_trace(e: Expr, budget: int = DEFAULT_BUDGET,
                        context: Expr | None = None) -> tuple[Expr, RewriteTrace]:
    tr = RewriteTrace()
    return simplify(e, tr, budget, context), tr


def recognize_density(m: Expr) -> Expr:
    """Replace ``x <~ p; Weight(w, x)`` by a primitive when the reweighted
    density has a known family; otherwise return ``m`` unchanged."""
    if not (isinstance(m, Bind) and isinstance(m.body, Weight) and m.body.point == Var(m.var)):
        return m
    s = Simplifier()
    with A.assuming(initial_facts(m)):
        d = s.simp(m.rhs)
        if not isinstance(d, PRIMITIVES):
            return m
        with A.assuming(var_facts(m.var, d, s.canon)):
            out = s._recognize(m.var, d, m.body.weight)
            if out is None:
                return m
            return s.measure(out)


def integrate_out(e: Expr) -> Expr:
    """Eliminate latent variables where a closed form exists.

    This is the full rewriter; every other rule is semantics preserving, so
    running them alongside is harmless.
    """
    return simplify(e)
