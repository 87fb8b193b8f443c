"""Weighted sampler, deterministic evaluator, MH/Gibbs chain runner and ESS.

Programs are compiled once into nested Python closures (cached per term) and
then run against an environment.  Runtime values are plain Python objects:
``float`` for reals, ``bool``, ``None`` for ``Unit``, 2-tuples for pairs,
:class:`Closure` for functions and :class:`MeasureV` for measure-valued terms
passed around as data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Mapping

import numpy as np

from . import quadrature
from .errors import EvalError, NonMeasure, ZeroMeasure, DegenerateChain
from .ir import (
    Add, And, App, Beta, Bind, BoolLit, Categorical, Const, Div, Equal, Exp, Expr, Fst,
    Gamma, GammaFn, If, Int, Lam, Less, Lit, Log, Mul, Name, Neg, Normal, Not, Pair, Pow,
    Snd, Sqrt, Sub, Sum, Superpose, Uniform, UnitLit, Var, Weight, free_vars,
)

UNIT = None


@dataclass(frozen=True)
class Closure:
    var: Name
    body: Expr
    env: "Env"


@dataclass(frozen=True)
class MeasureV:
    expr: Expr
    env: "Env"


class Env(Mapping):
    """Immutable association of names to values; ``extend`` returns a new Env."""

    __slots__ = ("_d",)

    def __init__(self, items: Mapping | None = None):
        d = {}
        for k, v in (items or {}).items():
            d[k if isinstance(k, Name) else Name(k)] = v
        self._d = d

    @classmethod
    def _wrap(cls, d: dict) -> "Env":
        env = cls.__new__(cls)
        env._d = d
        return env

    def extend(self, name: Name, value) -> "Env":
        d = dict(self._d)
        d[name] = value
        return Env._wrap(d)

    def __getitem__(self, k):
        return self._d[k if isinstance(k, Name) else Name(k)]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __repr__(self):
        return "Env({" + ", ".join(f"{k}: {v!r}" for k, v in self._d.items()) + "})"


def make_rng(seed: int) -> np.random.Generator:
    """Philox4x64 counter-based generator; substreams come from :func:`spawn_rngs`."""
    return np.random.Generator(np.random.Philox(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


# -- numeric helpers (IEEE semantics instead of Python exceptions) ---------

def _div(a, b):
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _log(a):
    if a > 0:
        return math.log(a)
    if a == 0:
        return -math.inf
    return math.nan


def _sqrt(a):
    return math.sqrt(a) if a >= 0 else math.nan


def _pow(a, b):
    try:
        r = a ** b
    except ZeroDivisionError:
        return math.inf
    except OverflowError:
        return math.inf
    if isinstance(r, complex):
        return math.nan
    return float(r)


def _gamma(a):
    try:
        return math.gamma(a)
    except (OverflowError, ValueError):
        return math.inf if a > 0 else math.nan


def _mul(a, b):
    # keep 0 * inf at 0 so indicator factors can switch off infinite densities
    if a == 0 or b == 0:
        return 0.0
    return a * b


def _real(v, what):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalError(f"{what}: expected a real, got {v!r}")
    return float(v)


# -- compilation ----------------------------------------------------------

DetFn = Callable[[dict], Any]
MeasFn = Callable[[dict, np.random.Generator], tuple]

_det_cache: dict[Expr, DetFn] = {}
_meas_cache: dict[Expr, MeasFn] = {}
_CACHE_LIMIT = 200_000


def _cached(cache, e, build):
    fn = cache.get(e)
    if fn is None:
        if len(cache) > _CACHE_LIMIT:
            cache.clear()
        fn = build(e)
        cache[e] = fn
    return fn


def compile_det(e: Expr) -> DetFn:
    return _cached(_det_cache, e, _build_det)


def compile_measure(e: Expr) -> MeasFn:
    return _cached(_meas_cache, e, _build_meas)


def _binary(op, a: Expr, b: Expr, name: str):
    fa, fb = compile_det(a), compile_det(b)

    def run(env):
        return op(_real(fa(env), name), _real(fb(env), name))
    return run


def _apply(fv, arg):
    if not isinstance(fv, Closure):
        raise EvalError(f"cannot apply non-function {fv!r}")
    return compile_det(fv.body)(_extend(fv.env, fv.var, arg))


def _extend(env, name, value):
    d = dict(env._d) if isinstance(env, Env) else dict(env)
    d[name] = value
    return d


def _build_det(e: Expr) -> DetFn:
    match e:
        case Var(name):
            def run(env):
                try:
                    return env[name]
                except KeyError:
                    raise EvalError(f"unbound variable {name}") from None
            return run
        case Lit(q):
            v = float(q)
            return lambda env: v
        case Const("pi"):
            return lambda env: math.pi
        case Const("inf"):
            return lambda env: math.inf
        case BoolLit(b):
            return lambda env: b
        case UnitLit():
            return lambda env: UNIT
        case Neg(a):
            fa = compile_det(a)
            return lambda env: -_real(fa(env), "negation")
        case Add(a, b):
            return _binary(lambda x, y: x + y, a, b, "+")
        case Sub(a, b):
            return _binary(lambda x, y: x - y, a, b, "-")
        case Mul(a, b):
            fa, fb = compile_det(a), compile_det(b)

            def run(env):
                x = _real(fa(env), "*")
                if x == 0:
                    return 0.0
                return _mul(x, _real(fb(env), "*"))
            return run
        case Div(a, b):
            return _binary(_div, a, b, "/")
        case Pow(a, b):
            return _binary(_pow, a, b, "^")
        case Less(a, b):
            return _binary(lambda x, y: x < y, a, b, "<")
        case Equal(a, b):
            fa, fb = compile_det(a), compile_det(b)
            return lambda env: fa(env) == fb(env)
        case And(a, b):
            fa, fb = compile_det(a), compile_det(b)
            return lambda env: bool(fa(env)) and bool(fb(env))
        case Not(a):
            fa = compile_det(a)
            return lambda env: not fa(env)
        case Exp(a):
            fa = compile_det(a)
            return lambda env: _exp(_real(fa(env), "exp"))
        case Log(a):
            fa = compile_det(a)
            return lambda env: _log(_real(fa(env), "log"))
        case Sqrt(a):
            fa = compile_det(a)
            return lambda env: _sqrt(_real(fa(env), "sqrt"))
        case GammaFn(a):
            fa = compile_det(a)
            return lambda env: _gamma(_real(fa(env), "gamma"))
        case If(c, a, b):
            fc, fa, fb = compile_det(c), compile_det(a), compile_det(b)
            return lambda env: fa(env) if fc(env) else fb(env)
        case Int(lo, hi, x, body):
            return _build_int(e, lo, hi, x, body)
        case Sum(lo, hi, x, body):
            flo, fhi, fb = compile_det(lo), compile_det(hi), compile_det(body)

            def run(env):
                a, b = _real(flo(env), "Sum"), _real(fhi(env), "Sum")
                if math.isinf(a) or math.isinf(b):
                    raise EvalError("Sum with infinite bounds")
                total = 0.0
                d = dict(env)
                for i in range(math.ceil(a), math.floor(b) + 1):
                    d[x] = float(i)
                    total += _real(fb(d), "Sum body")
                return total
            return run
        case Lam(x, body):
            return lambda env: Closure(x, body, Env._wrap(dict(env)))
        case App(f, a):
            ff, fa = compile_det(f), compile_det(a)
            return lambda env: _apply(ff(env), fa(env))
        case Pair(a, b):
            fa, fb = compile_det(a), compile_det(b)
            return lambda env: (fa(env), fb(env))
        case Fst(a) | Snd(a):
            fa = compile_det(a)
            idx = 0 if isinstance(e, Fst) else 1

            def run(env):
                v = fa(env)
                if not isinstance(v, tuple):
                    raise EvalError(f"projection of non-pair {v!r}")
                return v[idx]
            return run
        case Uniform() | Normal() | Gamma() | Beta() | Weight() | Categorical() | Superpose() | Bind():
            return lambda env: MeasureV(e, Env._wrap(dict(env)))
    raise EvalError(f"cannot evaluate {type(e).__name__}")


def _build_int(e, lo, hi, x, body):
    flo, fhi, fb = compile_det(lo), compile_det(hi), compile_det(body)
    fv = sorted(free_vars(e))
    memo: dict = {}

    def run(env):
        try:
            key = tuple(env[v] for v in fv)
            hash(key)
        except (KeyError, TypeError):
            key = None
        if key is not None and key in memo:
            return memo[key]
        a, b = _real(flo(env), "Int bound"), _real(fhi(env), "Int bound")
        d = dict(env)

        def f(t):
            d[x] = t
            return _real(fb(d), "Int body")
        out = quadrature.integrate(f, a, b)
        if key is not None:
            if len(memo) > 4096:
                memo.clear()
            memo[key] = out
        return out
    return run


def _categorical_pick(weights, rng):
    total = sum(weights)
    if not total > 0 or math.isinf(total):
        raise ZeroMeasure(f"total branch mass {total}")
    u = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            return i, total
    return max(i for i, w in enumerate(weights) if w > 0), total


def _build_meas(e: Expr) -> MeasFn:
    match e:
        case Weight(w, pt):
            fw, fp = compile_det(w), compile_det(pt)

            def run(env, rng):
                wv = _real(fw(env), "Weight")
                if wv < 0:
                    raise EvalError(f"negative weight {wv}")
                return fp(env), wv
            return run
        case Uniform(a, b):
            fa, fb = compile_det(a), compile_det(b)

            def run(env, rng):
                lo, hi = _real(fa(env), "Uniform"), _real(fb(env), "Uniform")
                if not lo < hi:
                    raise EvalError(f"Uniform({lo}, {hi}) has an empty range")
                return lo + (hi - lo) * rng.random(), 1.0
            return run
        case Normal(a, b):
            fa, fb = compile_det(a), compile_det(b)

            def run(env, rng):
                mu, sd = _real(fa(env), "Normal"), _real(fb(env), "Normal")
                if not sd > 0:
                    raise EvalError(f"Normal sd must be positive, got {sd}")
                return mu + sd * rng.standard_normal(), 1.0
            return run
        case Gamma(a, b):
            fa, fb = compile_det(a), compile_det(b)

            def run(env, rng):
                k, th = _real(fa(env), "Gamma"), _real(fb(env), "Gamma")
                if not (k > 0 and th > 0):
                    raise EvalError(f"Gamma parameters must be positive, got {k}, {th}")
                return float(rng.gamma(k, th)), 1.0
            return run
        case Beta(a, b):
            fa, fb = compile_det(a), compile_det(b)

            def run(env, rng):
                p, q = _real(fa(env), "Beta"), _real(fb(env), "Beta")
                if not (p > 0 and q > 0):
                    raise EvalError(f"Beta parameters must be positive, got {p}, {q}")
                return float(rng.beta(p, q)), 1.0
            return run
        case Categorical(pairs):
            fws = [compile_det(w) for w, _ in pairs]
            fvs = [compile_det(v) for _, v in pairs]

            def run(env, rng):
                ws = [_real(f(env), "Categorical weight") for f in fws]
                if any(w < 0 for w in ws):
                    raise EvalError("negative Categorical weight")
                i, _ = _categorical_pick(ws, rng)
                return fvs[i](env), 1.0
            return run
        case Superpose(pairs):
            fws = [compile_det(w) for w, _ in pairs]
            fms = [compile_measure(m) for _, m in pairs]

            def run(env, rng):
                ws = [_real(f(env), "Superpose weight") for f in fws]
                if any(w < 0 for w in ws):
                    raise EvalError("negative Superpose weight")
                i, total = _categorical_pick(ws, rng)
                v, w = fms[i](env, rng)
                return v, w * total
            return run
        case Bind(x, rhs, body):
            fr, fb = compile_measure(rhs), compile_measure(body)

            def run(env, rng):
                v1, w1 = fr(env, rng)
                d = dict(env)
                d[x] = v1
                v2, w2 = fb(d, rng)
                return v2, w1 * w2
            return run
        case If(c, a, b):
            fc, fa, fb = compile_det(c), compile_measure(a), compile_measure(b)
            return lambda env, rng: fa(env, rng) if fc(env) else fb(env, rng)
        case App(f, a):
            ff, fa = compile_det(f), compile_det(a)

            def run(env, rng):
                clo = ff(env)
                if not isinstance(clo, Closure):
                    raise NonMeasure(f"cannot apply non-function {clo!r}")
                return compile_measure(clo.body)(_extend(clo.env, clo.var, fa(env)), rng)
            return run
        case Var(name):
            def run(env, rng):
                v = env.get(name) if isinstance(env, dict) else env[name]
                if not isinstance(v, MeasureV):
                    raise NonMeasure(f"{name} is not bound to a measure")
                return compile_measure(v.expr)(dict(v.env._d), rng)
            return run
    raise NonMeasure(f"{type(e).__name__} is not a measure")


def _as_dict(env) -> dict:
    if env is None:
        return {}
    if isinstance(env, Env):
        return dict(env._d)
    return {k if isinstance(k, Name) else Name(k): v for k, v in env.items()}


# -- public API ---------------------------------------------------------------

def evaluate(e: Expr, env: Mapping | None = None):
    """Evaluate a non-measure term."""
    return compile_det(e)(_as_dict(env))


eval_expr = evaluate


def sample(m: Expr, env: Mapping | None = None, rng: np.random.Generator | None = None):
    """Draw one weighted sample ``(value, weight)`` from the measure ``m``."""
    if rng is None:
        rng = make_rng(0)
    return compile_measure(m)(_as_dict(env), rng)


def sample_many(m: Expr, n: int, env: Mapping | None = None, rng=None) -> Iterator[tuple]:
    if rng is None:
        rng = make_rng(0)
    fn, d = compile_measure(m), _as_dict(env)
    for _ in range(n):
        yield fn(d, rng)


def weighted_mean(m: Expr, f: Callable, n: int, env=None, rng=None) -> tuple[float, float]:
    """Unnormalized importance estimate of the integral of ``f`` under ``m``.

    Returns (estimate, standard error) of the mean of ``w * f(v)`` over n draws.
    """
    vals = np.empty(n)
    for i, (v, w) in enumerate(sample_many(m, n, env, rng)):
        vals[i] = w * f(v) if w else 0.0
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


# -- chains -------------------------------------------------------------------

@dataclass
class Chain:
    init: Any
    states: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    proposals: list = field(default_factory=list)
    seed: int = 0

    def __len__(self):
        return len(self.states)

    def acceptance_rate(self) -> float:
        return sum(self.accepted) / len(self.accepted) if self.accepted else 0.0

    def column(self, path: str | tuple = ()) -> np.ndarray:
        """Extract a real coordinate, e.g. ``"0.1"`` for ``state[0][1]``."""
        if isinstance(path, str):
            path = tuple(int(p) for p in path.split(".") if p != "")
        out = []
        for s in self.states:
            for i in path:
                s = s[i]
            out.append(float(s))
        return np.asarray(out)

    def jsonl(self) -> Iterator[str]:
        for s, r, a in zip(self.states, self.ratios, self.accepted):
            yield json.dumps({"value": value_to_json(s), "weight": 1.0, "ratio": _json_float(r), "accepted": a})


def _closure_of(kernel, env):
    if isinstance(kernel, Closure):
        return kernel
    clo = evaluate(kernel, env)
    if not isinstance(clo, Closure):
        raise EvalError("kernel must evaluate to a function")
    return clo


def run_chain(kernel: Expr | Closure, init, n: int, rng: np.random.Generator | None = None,
              env: Mapping | None = None, kind: str = "mh", seed: int | None = None) -> Chain:
    """Iterate a transition kernel ``n`` times starting from ``init``.

    ``kind="mh"``: the kernel yields ``(proposal, ratio)``; the proposal is
    accepted with probability ``min(1, ratio)`` using one uniform draw.
    ``kind="gibbs"``: the kernel yields the next state directly.
    """
    if rng is None:
        seed = 0 if seed is None else seed
        rng = make_rng(seed)
    clo = _closure_of(kernel, env)
    body = compile_measure(clo.body)
    base = dict(clo.env._d)
    chain = Chain(init=init, seed=seed if seed is not None else -1)
    state = init
    for i in range(n):
        base[clo.var] = state
        try:
            out, w = body(base, rng)
        except EvalError as err:
            raise type(err)(f"iteration {i}: {err}") from err
        if kind == "gibbs":
            if abs(w - 1.0) > 1e-9:
                raise EvalError(f"iteration {i}: gibbs kernel produced weight {w}; simplify it first")
            state, ratio, ok = out, 1.0, True
            chain.proposals.append(out)
        else:
            proposed, ratio = out
            ratio = float(ratio)
            u = rng.random()
            ok = bool(not math.isnan(ratio) and u < min(1.0, ratio))
            chain.proposals.append(proposed)
            if ok:
                state = proposed
        chain.states.append(state)
        chain.ratios.append(ratio)
        chain.accepted.append(ok)
    return chain


def ess(xs) -> float:
    """Effective sample size with Geyer's initial positive sequence estimator."""
    x = np.asarray(xs, dtype=float)
    n = len(x)
    if n < 10:
        raise ValueError("ess needs at least 10 draws")
    x = x - x.mean()
    var = float(x @ x) / n
    if not var > 0:
        raise DegenerateChain("chain has zero variance")
    size = 1 << (2 * n - 1).bit_length()
    fx = np.fft.rfft(x, size)
    acov = np.fft.irfft(fx * np.conj(fx), size)[:n] / n
    rho = acov / acov[0]
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2 * pair
    return n / tau


# -- value helpers ------------------------------------------------------------

def _json_float(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def value_to_json(v):
    if isinstance(v, tuple):
        return [value_to_json(v[0]), value_to_json(v[1])]
    if v is None or isinstance(v, bool):
        return v
    if isinstance(v, (int, float)):
        return _json_float(float(v))
    return repr(v)


def value_to_expr(v) -> Expr:
    from fractions import Fraction
    if isinstance(v, tuple):
        return Pair(value_to_expr(v[0]), value_to_expr(v[1]))
    if v is None:
        return UnitLit()
    if isinstance(v, bool):
        return BoolLit(v)
    if isinstance(v, (int, float)):
        return Lit(Fraction(v))
    raise EvalError(f"cannot reify {v!r}")
