import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from conftest import load
from probxform.disintegrate import density, disintegrate, observe
from probxform.errors import NotInvertible, NotPairMeasure, Unhandled
from probxform.expect import expect
from probxform.ir import App, Bind, Lam, Lit, Name, Pair, Var, alpha_equal, lit
from probxform.sampler import evaluate
from probxform.simplify import simplify
from probxform.syntax import parse, pretty

x, y = Name("x"), Name("y")
UU = "x <~ Uniform(0, 2); Uniform(x, 3)"


def test_observe_uniform_uniform():
    out = observe(parse(UU), Var(y))
    assert alpha_equal(out, parse("x <~ Uniform(0, 2); Weight(If(x<y<3, 1/(3-x), 0), y)"))


def test_observe_uniform_at_point():
    out = simplify(observe(parse("Uniform(0, 1)"), lit(0.5)))
    assert out == simplify(parse("Weight(1, 0.5)"))
    assert pretty(out) == "Dirac(1/2)"


def test_observe_rejects_dirac():
    with pytest.raises(Unhandled):
        observe(parse("Dirac(3)"), Var(y))
    with pytest.raises(Unhandled):
        observe(parse("x <~ Uniform(0, 1); Dirac(x + 1)"), Var(y))


def test_observe_maps_over_superpose():
    out = observe(parse("Superpose((1, Uniform(0, 1)), (2, Uniform(0, 2)))"), lit(0.5))
    assert evaluate(expect(out, parse("Lam(v, 1)"))) == pytest.approx(1 * 1 + 2 * 0.5)


def test_disintegrate_uniform_pair():
    out = disintegrate(parse("x <~ Uniform(0, 2); y <~ Uniform(x, 3); Dirac((y, x))"))
    expected = Lam(y, parse("x <~ Uniform(0, 2); Weight(If(x<y<3, 1/(3-x), 0), x)"))
    assert alpha_equal(out, expected)


def test_bridge_law():
    m = parse("x <~ Uniform(0, 2); y <~ Uniform(x, 3); Dirac((y, x))")
    bridged = Lam(y, Bind(x, parse("Uniform(0, 2)"),
                          Bind(Name("dummy"), observe(parse("Uniform(x, 3)"), Var(y)), parse("Dirac(x)"))))
    assert alpha_equal(simplify(disintegrate(m)), simplify(bridged))


def test_disintegrate_jacobian():
    out = simplify(disintegrate(parse("x <~ Uniform(0, 1); Dirac((2*x, Unit))")))
    assert alpha_equal(out, parse("Lam(o, Weight(If(0<o<2, 1/2, 0), Unit))"))
    draws = 2 * np.random.default_rng(0).random(10**6)
    hist, edges = np.histogram(draws, bins=30, range=(-0.5, 2.5), density=True)
    centres = (edges[:-1] + edges[1:]) / 2
    for c, h in zip(centres, hist):
        w = evaluate(expect(App(out, lit(float(c))), parse("Lam(u, 1)")))
        assert w == pytest.approx(h, abs=0.01)


@pytest.mark.parametrize("src,at,oracle", [
    ("x <~ Normal(0, 1); Dirac((exp(x), Unit))", 1.7, stats.lognorm(1).pdf(1.7)),
    ("x <~ Normal(0, 1); Dirac((3 - x, Unit))", 2.5, stats.norm(3, 1).pdf(2.5)),
    ("x <~ Uniform(1, 2); Dirac((log(x), Unit))", 0.4, math.exp(0.4)),
    ("x <~ Normal(1, 2); Dirac((x/4 + 1, Unit))", 1.3, stats.norm(1.25, 0.5).pdf(1.3)),
])
def test_invertible_class(src, at, oracle):
    k = disintegrate(parse(src))
    assert evaluate(expect(App(k, lit(at)), parse("Lam(u, 1)"))) == pytest.approx(oracle, rel=1e-9)


def test_not_invertible():
    with pytest.raises(NotInvertible):
        disintegrate(parse("x <~ Normal(0, 1); y <~ Normal(0, 1); Dirac((x + y, x))"))
    with pytest.raises(NotInvertible):
        disintegrate(parse("x <~ Normal(0, 1); Dirac((x^2, x))"))


def test_not_pair_measure():
    with pytest.raises(NotPairMeasure):
        disintegrate(parse("Normal(0, 1)"))


def test_density_uniform_pair():
    out = density(parse("x <~ Uniform(0, 2); y <~ Uniform(x, 3); Dirac((x, y))"), Pair(Var(x), Var(y)))
    assert alpha_equal(out, parse("If(0<x<2, If(x<y<3, 1/(3-x), 0)/(2-0), 0)"))
    assert evaluate(out, {"x": 1.0, "y": 2.0}) == pytest.approx(0.25)


def test_density_pointwise_values():
    assert evaluate(density(parse("Uniform(0, 1)"), lit(2))) == 0
    assert evaluate(density(parse("Normal(0, 1)"), lit(0))) == pytest.approx(stats.norm.pdf(0), abs=1e-12)


def test_density_integrates_to_one():
    d = density(parse("x <~ Uniform(0, 2); y <~ Uniform(x, 3); Dirac((x, y))"), Pair(Var(x), Var(y)))
    f = lambda yy, xx: evaluate(d, {"x": xx, "y": yy})
    val, _ = integrate.dblquad(f, 0, 2, lambda xx: xx, lambda xx: 3, epsabs=1e-10)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_density_categorical():
    d = density(parse("Categorical((1, 0), (3, 1))"), Var(x))
    assert [evaluate(d, {"x": v}) for v in (0.0, 1.0, 2.0)] == pytest.approx([0.25, 0.75, 0.0])


def test_mass_preservation_fubini():
    m = parse("x <~ Uniform(0, 2); y <~ Uniform(x, 3); Dirac((y, x))")
    k = disintegrate(m)
    total = evaluate(expect(m, parse("Lam(p, 1)")))
    slice_mass = lambda o: evaluate(expect(App(k, lit(o)), parse("Lam(p, 1)")))
    val, _ = integrate.quad(slice_mass, 0, 3, points=[2.0], epsabs=1e-10)
    assert val == pytest.approx(total, abs=1e-6)


@given(st.floats(-3, 5), st.floats(-3, 5))
def test_density_nonnegative(a, b):
    d = density(parse("x <~ Uniform(0, 2); y <~ Normal(x, 1); Dirac((x, y))"), Pair(Var(x), Var(y)))
    assert evaluate(d, {"x": a, "y": b}) >= 0
