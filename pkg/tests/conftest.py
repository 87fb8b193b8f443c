from __future__ import annotations

import sys
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from probxform.ir import (
    Add, App, Bind, Categorical, Div, Exp, Fst, If, Int, Lam, Less, Lit, Log, Mul, Name, Neg,
    Normal, Pair, Pow, Snd, Sqrt, Sub, Sum, Superpose, Uniform, Var, Weight,
)
from probxform.syntax import parse

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TESTS = Path(__file__).parent
CORPUS = sorted((TESTS / "corpus").glob("*.ppt"))
GOLDENS = TESTS / "goldens"


def load(path) -> object:
    return parse(Path(path).read_text())


@pytest.fixture(scope="session")
def kalman_progs():
    from probxform.experiments import kalman_programs
    return kalman_programs()


# -- random terms -------------------------------------------------------------

NAMES = [Name(t) for t in ("a", "b", "x", "y", "z")]

lits = st.builds(lambda n, d: Lit(Fraction(n, d)),
                 st.integers(min_value=-20, max_value=20), st.integers(min_value=1, max_value=8))


def _arith(children):
    un = st.one_of(st.builds(Neg, children), st.builds(Exp, children),
                   st.builds(Log, children), st.builds(Sqrt, children))
    bin_ = st.one_of(*(st.builds(c, children, children) for c in (Add, Sub, Mul, Div)))
    pw = st.builds(Pow, children, lits)
    cond = st.builds(If, st.builds(Less, children, children), children, children)
    return st.one_of(un, bin_, pw, cond)


def _binders(children):
    name = st.sampled_from(NAMES)
    return st.one_of(
        st.builds(lambda x, b: Lam(x, b), name, children),
        st.builds(lambda f, a: App(f, a), children, children),
        st.builds(lambda lo, hi, x, b: Int(lo, hi, x, b), children, children, name, children),
        st.builds(lambda lo, hi, x, b: Sum(lo, hi, x, b), children, children, name, children),
        st.builds(Pair, children, children),
        st.builds(Fst, children), st.builds(Snd, children),
    )


raw_terms = st.recursive(st.one_of(lits, st.builds(Var, st.sampled_from(NAMES))),
                         lambda ch: st.one_of(_arith(ch), _binders(ch)), max_leaves=12)

_num = st.recursive(st.one_of(lits, st.builds(Var, st.sampled_from(NAMES))), _arith, max_leaves=6)


def _measures(children):
    name = st.sampled_from(NAMES)
    return st.one_of(
        st.builds(lambda x, m, k: Bind(x, m, k), name, children, children),
        st.builds(lambda w, p: Weight(w, p), _num, _num),
        st.builds(lambda ps: Superpose(tuple(ps)),
                  st.lists(st.tuples(_num, children), min_size=1, max_size=3)),
    )


measure_terms = st.recursive(
    st.one_of(st.builds(Uniform, _num, _num), st.builds(Normal, _num, _num),
              st.builds(lambda ps: Categorical(tuple(ps)),
                        st.lists(st.tuples(_num, _num), min_size=1, max_size=3))),
    _measures, max_leaves=8)

any_terms = st.one_of(raw_terms, measure_terms)


def equivalent(out, golden, context=None) -> bool:
    """Alpha-equality after simplifying both sides.

    Leading ``Lam`` binders are first given a shared name: term order in the
    simplifier's normal form depends on variable names.
    """
    from probxform.ir import Lam, Var, alpha_equal, fresh, substitute
    from probxform.simplify import simplify
    while isinstance(out, Lam) and isinstance(golden, Lam):
        v = Var(fresh("arg"))
        out, golden = substitute(out.body, out.var, v), substitute(golden.body, golden.var, v)
    return alpha_equal(simplify(out, context=context), simplify(golden, context=context))


# -- finite-state MH checks ------------------------------------------------------

FINITE_TARGETS = [
    ("two-state flip", "Categorical((0.2, 0), (0.8, 1))", "Lam(s, Dirac(1 - s))", [0.0, 1.0]),
    ("three-state independence", "Categorical((0.5, 0), (0.3, 1), (0.2, 2))",
     "Lam(s, Categorical((1, 0), (1, 1), (1, 2)))", [0.0, 1.0, 2.0]),
    ("four-state ring", "z <~ Categorical((1, 0), (1, 1), (1, 2), (1, 3)); Weight(1 + z, z)",
     "Lam(s, Categorical((1/2, If(s == 0, 3, s - 1)), (1/2, If(s == 3, 0, s + 1))))",
     [0.0, 1.0, 2.0, 3.0]),
    ("binary pair", "x <~ Categorical((0.3, 0), (0.7, 1));"
     " y <~ Categorical((0.4 + 0.4*x, 0), (0.6 - 0.4*x, 1)); Dirac((x, y))",
     "Lam(s, Superpose((1/2, Dirac((1 - s[0], s[1]))), (1/2, Dirac((s[0], 1 - s[1])))))",
     [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]),
]


def target_probs(target, states):
    import numpy as np
    from probxform.disintegrate import density
    from probxform.sampler import evaluate, value_to_expr
    p = np.array([evaluate(density(target, value_to_expr(s))) for s in states])
    return p / p.sum()


def flow_matrix(kernel, target, states):
    """pi(s) K(s, s') for s != s', with K computed by exact enumeration."""
    import numpy as np
    from probxform.expect import expect
    from probxform.ir import App, Equal, Fst, If, Lam, Snd, Var, fresh, lit
    from probxform.sampler import evaluate, value_to_expr
    pi = target_probs(target, states)
    p = fresh("p")
    flow = np.zeros((len(states), len(states)))
    for i, s in enumerate(states):
        step = App(kernel, value_to_expr(s))
        for j, s2 in enumerate(states):
            if i == j:
                continue
            hit = Equal(Fst(Var(p)), value_to_expr(s2))
            q = evaluate(expect(step, Lam(p, If(hit, lit(1), lit(0)))))
            qr = evaluate(expect(step, Lam(p, If(hit, Snd(Var(p)), lit(0)))))
            flow[i, j] = pi[i] * (q * min(1.0, qr / q) if q > 0 else 0.0)
    return flow


def chain_tv(kernel, target, states, n, seed=1):
    import numpy as np
    from probxform.sampler import run_chain
    pi = target_probs(target, states)
    chain = run_chain(kernel, states[0], n, seed=seed)
    index = {s: k for k, s in enumerate(states)}
    counts = np.bincount([index[s] for s in chain.states], minlength=len(states))
    return 0.5 * float(np.abs(counts / n - pi).sum())
