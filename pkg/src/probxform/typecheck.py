"""Semantic types and a unification-based checker for the IR.

``Lam`` binders carry no annotation, so parameter types are inferred.
``NonNegReal`` is a refinement of ``Real``: inference works over ``Real`` and the
refinement is reported only for the top-level result when it is evident from
the syntax (literals, ``exp``, ``sqrt``, products of nonnegatives, ...).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

from .errors import TypeMismatch, UnboundVariable
from .ir import (
    Add, And, App, Beta, Bind, BoolLit, Categorical, Const, Div, Equal, Exp, Expr, Fst,
    Gamma, GammaFn, If, Int, Lam, Less, Lit, Log, Mul, Name, Neg, Normal, Not, Pair, Pow,
    Snd, Sqrt, Sub, Sum, Superpose, Uniform, UnitLit, Var, Weight,
)


class Type:
    __slots__ = ()


@dataclass(frozen=True)
class RealT(Type):
    def __str__(self):
        return "Real"


@dataclass(frozen=True)
class NonNegRealT(Type):
    def __str__(self):
        return "NonNegReal"


@dataclass(frozen=True)
class BoolT(Type):
    def __str__(self):
        return "Bool"


@dataclass(frozen=True)
class UnitT(Type):
    def __str__(self):
        return "Unit"


@dataclass(frozen=True)
class PairT(Type):
    fst: Type
    snd: Type

    def __str__(self):
        return f"({self.fst}, {self.snd})"


@dataclass(frozen=True)
class FnT(Type):
    arg: Type
    res: Type

    def __str__(self):
        return f"({self.arg} -> {self.res})"


@dataclass(frozen=True)
class MeasureT(Type):
    of: Type

    def __str__(self):
        return f"Measure({self.of})"


@dataclass(frozen=True)
class TVar(Type):
    id: int

    def __str__(self):
        return f"t{self.id}"


Real, NonNegReal, Bool, Unit = RealT(), NonNegRealT(), BoolT(), UnitT()


class _Solver:
    def __init__(self):
        self.sub: dict[int, Type] = {}
        self.ids = itertools.count()

    def fresh(self) -> TVar:
        return TVar(next(self.ids))

    def resolve(self, t: Type) -> Type:
        while isinstance(t, TVar) and t.id in self.sub:
            t = self.sub[t.id]
        return t

    def zonk(self, t: Type) -> Type:
        t = self.resolve(t)
        match t:
            case PairT(a, b):
                return PairT(self.zonk(a), self.zonk(b))
            case FnT(a, b):
                return FnT(self.zonk(a), self.zonk(b))
            case MeasureT(a):
                return MeasureT(self.zonk(a))
        return t

    def occurs(self, v: TVar, t: Type) -> bool:
        t = self.resolve(t)
        if t == v:
            return True
        match t:
            case PairT(a, b) | FnT(a, b):
                return self.occurs(v, a) or self.occurs(v, b)
            case MeasureT(a):
                return self.occurs(v, a)
        return False

    def unify(self, a: Type, b: Type, path) -> None:
        a, b = self.resolve(a), self.resolve(b)
        if a == NonNegReal:
            a = Real
        if b == NonNegReal:
            b = Real
        if a == b:
            return
        if isinstance(a, TVar):
            if self.occurs(a, b):
                raise TypeMismatch(f"infinite type {a} ~ {self.zonk(b)}", path)
            self.sub[a.id] = b
            return
        if isinstance(b, TVar):
            self.unify(b, a, path)
            return
        if type(a) is type(b) and isinstance(a, (PairT, FnT)):
            self.unify(a.fst if isinstance(a, PairT) else a.arg, b.fst if isinstance(b, PairT) else b.arg, path)
            self.unify(a.snd if isinstance(a, PairT) else a.res, b.snd if isinstance(b, PairT) else b.res, path)
            return
        if isinstance(a, MeasureT) and isinstance(b, MeasureT):
            self.unify(a.of, b.of, path)
            return
        raise TypeMismatch(f"expected {self.zonk(b)}, got {self.zonk(a)}", path)


def _provably_negative(e: Expr) -> bool:
    match e:
        case Lit(q):
            return q < 0
        case Neg(Lit(q)):
            return q > 0
        case Neg(Const("pi")):
            return True
    return False


def _nonneg(e: Expr) -> bool:
    match e:
        case Lit(q):
            return q >= 0
        case Const(_):
            return True
        case Exp(_) | Sqrt(_):
            return True
        case Mul(a, b) | Div(a, b) | Add(a, b):
            return _nonneg(a) and _nonneg(b)
        case If(_, a, b):
            return _nonneg(a) and _nonneg(b)
        case Int(_, _, _, body) | Sum(_, _, _, body):
            return _nonneg(body)
        case Pow(a, Lit(q)):
            return _nonneg(a) or (q.denominator == 1 and q.numerator % 2 == 0)
    return False


class _Checker:
    def __init__(self):
        self.s = _Solver()

    def real(self, e, env, path):
        self.s.unify(self.check(e, env, path), Real, path)

    def check(self, e: Expr, env: dict, path: tuple) -> Type:
        s = self.s
        match e:
            case Var(name):
                if name not in env:
                    raise UnboundVariable(f"unbound variable {name}")
                return env[name]
            case Lit(_) | Const(_):
                return Real
            case BoolLit(_):
                return Bool
            case UnitLit():
                return Unit
            case Neg(a) | Exp(a) | Log(a) | Sqrt(a) | GammaFn(a):
                self.real(a, env, path + (type(e).__name__,))
                return Real
            case Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b):
                self.real(a, env, path + (type(e).__name__, 0))
                self.real(b, env, path + (type(e).__name__, 1))
                return Real
            case Less(a, b):
                self.real(a, env, path + ("Less", 0))
                self.real(b, env, path + ("Less", 1))
                return Bool
            case Equal(a, b):
                ta = self.check(a, env, path + ("Equal", 0))
                s.unify(self.check(b, env, path + ("Equal", 1)), ta, path + ("Equal",))
                return Bool
            case And(a, b):
                s.unify(self.check(a, env, path + ("And", 0)), Bool, path + ("And", 0))
                s.unify(self.check(b, env, path + ("And", 1)), Bool, path + ("And", 1))
                return Bool
            case Not(a):
                s.unify(self.check(a, env, path + ("Not",)), Bool, path + ("Not",))
                return Bool
            case If(c, a, b):
                s.unify(self.check(c, env, path + ("If", 0)), Bool, path + ("If", 0))
                ta = self.check(a, env, path + ("If", 1))
                s.unify(self.check(b, env, path + ("If", 2)), ta, path + ("If", 2))
                return ta
            case Sum(lo, hi, x, body) | Int(lo, hi, x, body):
                tag = type(e).__name__
                self.real(lo, env, path + (tag, "lo"))
                self.real(hi, env, path + (tag, "hi"))
                self.real(body, {**env, x: Real}, path + (tag, "body"))
                return Real
            case Lam(x, body):
                tx = s.fresh()
                return FnT(tx, self.check(body, {**env, x: tx}, path + ("Lam",)))
            case App(f, a):
                tf = self.check(f, env, path + ("App", 0))
                ta = self.check(a, env, path + ("App", 1))
                tr = s.fresh()
                s.unify(tf, FnT(ta, tr), path + ("App",))
                return tr
            case Pair(a, b):
                return PairT(self.check(a, env, path + ("Pair", 0)), self.check(b, env, path + ("Pair", 1)))
            case Fst(a) | Snd(a):
                ta = self.check(a, env, path + (type(e).__name__,))
                l, r = s.fresh(), s.fresh()
                s.unify(ta, PairT(l, r), path + (type(e).__name__,))
                return l if isinstance(e, Fst) else r
            case Uniform(a, b) | Normal(a, b) | Gamma(a, b) | Beta(a, b):
                tag = type(e).__name__
                self.real(a, env, path + (tag, 0))
                self.real(b, env, path + (tag, 1))
                return MeasureT(Real)
            case Weight(w, pt):
                self.real(w, env, path + ("Weight", 0))
                if _provably_negative(w):
                    raise TypeMismatch("Weight requires a nonnegative weight", path + ("Weight", 0))
                return MeasureT(self.check(pt, env, path + ("Weight", 1)))
            case Categorical(pairs):
                out = s.fresh()
                for i, (w, v) in enumerate(pairs):
                    self.real(w, env, path + ("Categorical", i, 0))
                    if _provably_negative(w):
                        raise TypeMismatch("negative Categorical weight", path + ("Categorical", i, 0))
                    s.unify(self.check(v, env, path + ("Categorical", i, 1)), out, path + ("Categorical", i))
                return MeasureT(out)
            case Superpose(pairs):
                out = MeasureT(s.fresh())
                for i, (w, m) in enumerate(pairs):
                    self.real(w, env, path + ("Superpose", i, 0))
                    if _provably_negative(w):
                        raise TypeMismatch("negative Superpose weight", path + ("Superpose", i, 0))
                    s.unify(self.check(m, env, path + ("Superpose", i, 1)), out, path + ("Superpose", i))
                return out
            case Bind(x, rhs, body):
                tr = self.check(rhs, env, path + ("Bind", str(x), "rhs"))
                a = s.fresh()
                s.unify(tr, MeasureT(a), path + ("Bind", str(x), "rhs"))
                tb = self.check(body, {**env, x: a}, path + ("Bind", str(x)))
                b = s.fresh()
                s.unify(tb, MeasureT(b), path + ("Bind", str(x)))
                return MeasureT(b)
        raise TypeMismatch(f"unknown expression {type(e).__name__}", path)


def typecheck(e: Expr, ctx: Mapping[Name, Type] | None = None) -> Type:
    """Infer the type of ``e``; free variables not in ``ctx`` are an error.

    Unconstrained type variables remain in the result as :class:`TVar`.
    """
    c = _Checker()
    t = c.check(e, dict(ctx or {}), ())
    t = c.s.zonk(t)
    if t == Real and _nonneg(e):
        return NonNegReal
    return t


def infer_free(e: Expr, ctx: Mapping[Name, Type] | None = None) -> tuple[Type, dict[Name, Type]]:
    """Like :func:`typecheck` but assigns fresh types to unbound variables."""
    from .ir import free_vars
    c = _Checker()
    env = dict(ctx or {})
    for x in free_vars(e):
        env.setdefault(x, c.s.fresh())
    t = c.s.zonk(c.check(e, env, ()))
    return t, {x: c.s.zonk(env[x]) for x in free_vars(e)}


def is_measure(t: Type) -> bool:
    return isinstance(t, MeasureT)


def contains_measure(t: Type) -> bool:
    match t:
        case MeasureT(_):
            return True
        case PairT(a, b) | FnT(a, b):
            return contains_measure(a) or contains_measure(b)
    return False
