import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FINITE_TARGETS, chain_tv, equivalent, flow_matrix
from probxform.errors import Unsupported
from probxform.ir import App, Bind, Lam, Lit, Name, Pair, Superpose, Weight, alpha_equal, lit
from probxform.mcmc import gibbs, mh
from probxform.sampler import make_rng, run_chain, sample
from probxform.simplify import simplify
from probxform.syntax import parse
from probxform.typecheck import FnT, MeasureT, PairT, Real, typecheck

BIVARIATE = "x <~ Normal(0, 1); y <~ Normal(x, 1); Dirac((x, y))"


def _branches(kernel):
    assert isinstance(kernel, Lam) and isinstance(kernel.body, Superpose)
    return kernel.body.pairs


def test_independent_uniform_ratio_is_one():
    k = simplify(mh(parse("Lam(s, Uniform(0, 1))"), parse("Uniform(0, 1)")).expr)
    assert alpha_equal(k, parse("Lam(o, n <~ Uniform(0, 1); Dirac((n, 1)))"))


def test_categorical_flip():
    target = parse("Categorical((0.2, 0), (0.8, 1))")
    k = simplify(mh(parse("Lam(s, Dirac(1 - s))"), target).expr)
    (state, ratio), w = sample(App(k, lit(0)))
    assert state == 1 and ratio == pytest.approx(4.0) and w == 1
    (state, ratio), _ = sample(App(k, lit(1)))
    assert state == 0 and ratio == pytest.approx(0.25)
    chain = run_chain(k, 0.0, 20000, seed=3)
    freq = chain.column().mean()
    assert abs(freq - 0.8) < 4 * math.sqrt(0.16 / 20000) * 2


def test_kernel_program_metadata():
    kp = mh(parse("Lam(s, Normal(s, 1))"), parse("Normal(0, 1)"))
    assert kp.kind == "mh" and kp.state_type == Real
    assert typecheck(kp.expr) == FnT(Real, MeasureT(PairT(Real, Real)))


def test_mh_reports_failing_density():
    with pytest.raises(Exception, match="target"):
        mh(parse("Lam(s, Normal(s, 1))"), parse("x <~ Normal(0, 1); Dirac(x^2)"))


def test_gibbs_bivariate_conditionals():
    kp = gibbs(parse(BIVARIATE))
    assert kp.kind == "gibbs"
    k = simplify(kp.expr)
    (w0, b0), (w1, b1) = _branches(k)
    assert simplify(w0) == simplify(parse("1/2")) == simplify(w1)
    expected_x = parse("v <~ Normal(s[1]/2, 1/sqrt(2)); Dirac((v, s[1]))")
    expected_y = parse("v <~ Normal(s[0], 1); Dirac((s[0], v))")
    assert equivalent(Lam(k.var, b0), Lam(Name("s"), expected_x))
    assert equivalent(Lam(k.var, b1), Lam(Name("s"), expected_y))


def test_gibbs_independent_product():
    k = simplify(gibbs(parse("x <~ Uniform(0, 1); y <~ Uniform(0, 1); Dirac((x, y))")).expr)
    expected = parse("Lam(s, Superpose((1/2, v <~ Uniform(0, 1); Dirac((v, s[1]))),"
                     " (1/2, v <~ Uniform(0, 1); Dirac((s[0], v)))))")
    assert equivalent(k, expected)


def test_gibbs_needs_two_coordinates():
    with pytest.raises(Unsupported):
        gibbs(parse("x <~ Normal(0, 1); Dirac(x)"))


def test_gibbs_as_mh_proposal_ratio_is_one():
    target = parse(BIVARIATE)
    k = simplify(mh(gibbs(target).expr, target).expr)
    for _, branch in _branches(k):
        assert isinstance(branch, Bind) and isinstance(branch.body, Weight)
        assert branch.body.point.snd == Lit(1)
    raw = mh(gibbs(target).expr, target).expr
    rng = make_rng(5)
    for _ in range(20):
        s = (float(rng.normal()), float(rng.normal()))
        (_, ratio), _ = sample(App(raw, Pair(lit(s[0]), lit(s[1]))), rng=rng)
        assert ratio == pytest.approx(1.0, abs=1e-9)


def test_gibbs_chain_moments():
    k = simplify(gibbs(parse(BIVARIATE)).expr)
    chain = run_chain(k, (0.0, 0.0), 40000, seed=2, kind="gibbs")
    xs, ys = chain.column("0"), chain.column("1")
    assert abs(xs.mean()) < 0.05 and abs(ys.mean()) < 0.07
    assert np.var(ys) == pytest.approx(2.0, rel=0.1)
    assert np.cov(xs, ys)[0, 1] == pytest.approx(1.0, rel=0.1)


def test_gibbs_runner_rejects_weighted_kernels():
    from probxform.errors import EvalError
    k = parse("Lam(s, Weight(2, s))")
    with pytest.raises(EvalError):
        run_chain(k, 0.0, 3, kind="gibbs")


@pytest.mark.parametrize("name,target,proposal,states", FINITE_TARGETS, ids=[t[0] for t in FINITE_TARGETS])
def test_detailed_balance(name, target, proposal, states):
    target = parse(target)
    for kernel in (mh(parse(proposal), target).expr, simplify(mh(parse(proposal), target).expr)):
        flow = flow_matrix(kernel, target, states)
        assert np.abs(flow - flow.T).max() < 1e-12


@pytest.mark.parametrize("name,target,proposal,states", FINITE_TARGETS[:2], ids=[t[0] for t in FINITE_TARGETS[:2]])
def test_stationary_distribution(name, target, proposal, states):
    target = parse(target)
    k = simplify(mh(parse(proposal), target).expr)
    assert chain_tv(k, target, states, 20000) < 0.03


def test_kalman5_shape(kalman_progs):
    k5 = kalman_progs.kalman5
    assert isinstance(k5, Lam)
    (w0, b0), (w1, b1) = _branches(k5.body)
    assert w0 == w1 == simplify(parse("1/2"))
    for b in (b0, b1):
        assert isinstance(b, Bind) and isinstance(b.body, Weight) and b.body.weight == Lit(1)
        assert isinstance(b.body.point, Pair)


def test_kalman5_has_no_prior_constants(kalman_progs):
    text = str(kalman_progs.kalman5)
    assert "1/5" not in text and "1/3" not in text and "sqrt(2*pi)" not in text


@given(st.floats(3.01, 7.99), st.floats(1.01, 3.99), st.floats(-3, 3), st.floats(-3, 3))
def test_kalman_ratio_positive(kalman_progs, t, e, m1, m2):
    k = App(App(kalman_progs.kalman5, Pair(lit(m1), lit(m2))), Pair(lit(t), lit(e)))
    ((_, ratio), w) = sample(k, rng=make_rng(0))
    assert ratio > 0 and w == 1


def test_kalman5_application(kalman_progs):
    k = App(App(kalman_progs.kalman5, Pair(lit(0), lit(1))), Pair(lit(5), lit(2)))
    ((proposed, ratio), w) = sample(k, rng=make_rng(1))
    assert w == 1.0 and ratio > 0
    assert sum(a != b for a, b in zip(proposed, (5.0, 2.0))) == 1
