from fractions import Fraction

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import CORPUS, NAMES, any_terms, load, raw_terms
from probxform.errors import TypeMismatch, UnboundVariable
from probxform.ir import (
    Bind, Lam, Lit, Name, Uniform, Var, Weight, alpha_equal, dirac, free_vars, fresh, substitute,
)
from probxform.syntax import parse
from probxform.typecheck import FnT, MeasureT, PairT, Real, typecheck

x, y = Name("x"), Name("y")


def test_fresh_names_are_unique():
    names = {fresh("x") for _ in range(100)}
    assert len(names) == 100


def test_dirac_is_unit_weight():
    assert dirac(Lit(Fraction(8))) == Weight(Lit(Fraction(1)), Lit(Fraction(8)))


def test_free_vars_examples():
    assert free_vars(Var(x)) == {x}
    assert free_vars(Bind(x, Uniform(Lit(0), Lit(2)), Uniform(Var(x), Lit(3)))) == frozenset()


def test_kalman2_body_free_vars(kalman_progs):
    k2 = kalman_progs.kalman2
    assert free_vars(k2.body) == {k2.var}
    golden = load("tests/goldens/kalman2.ppt")
    assert free_vars(golden.body) == {golden.var}


def test_substitute_examples():
    assert substitute(Var(x), x, Lit(3)) == Lit(3)
    out = substitute(Lam(y, Var(x)), x, Var(y))
    assert isinstance(out, Lam) and out.var != y and out.body == Var(y)


def test_alpha_equal_examples():
    assert alpha_equal(Lam(x, Var(x)), Lam(y, Var(y)))
    assert not alpha_equal(Lam(x, Var(x)), Lam(x, Lit(1)))
    assert not alpha_equal(Lam(x, Var(y)), Lam(y, Var(y)))


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_identity_substitution_on_corpus(path):
    e = load(path)
    for v in free_vars(e) | {x}:
        assert alpha_equal(substitute(e, v, Var(v)), e)


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_corpus_typechecks_deterministically(path):
    e = load(path)
    assert typecheck(e) == typecheck(e)
    assert isinstance(typecheck(e), MeasureT)


def test_kalman_types(kalman_progs):
    rr = PairT(Real, Real)
    assert typecheck(kalman_progs.model) == MeasureT(PairT(rr, rr))
    assert typecheck(load("tests/goldens/kalman2.ppt")) == FnT(rr, MeasureT(rr))


def test_type_errors():
    with pytest.raises(TypeMismatch):
        typecheck(parse("Weight(-1, 8)"))
    with pytest.raises(UnboundVariable):
        typecheck(parse("Uniform(0, q)"))
    with pytest.raises(TypeMismatch):
        typecheck(parse("x <~ 3; Dirac(x)"))


@given(raw_terms, st.sampled_from(NAMES), st.sampled_from(NAMES), raw_terms, raw_terms)
def test_substitution_lemma(e, a_name, b_name, a, b):
    assume(a_name != b_name and a_name not in free_vars(b))
    lhs = substitute(substitute(e, a_name, a), b_name, b)
    rhs = substitute(substitute(e, b_name, b), a_name, substitute(a, b_name, b))
    assert alpha_equal(lhs, rhs)


@given(any_terms, any_terms, any_terms)
def test_alpha_equal_is_an_equivalence(a, b, c):
    assert alpha_equal(a, a)
    assert alpha_equal(a, b) == alpha_equal(b, a)
    if alpha_equal(a, b) and alpha_equal(b, c):
        assert alpha_equal(a, c)


@given(any_terms)
def test_alpha_equal_under_renaming(e):
    renamed = e
    for v in free_vars(e):
        w = fresh(v)
        renamed = Lam(w, substitute(renamed, v, Var(w)))
        e = Lam(v, e)
    assert alpha_equal(renamed, e)
