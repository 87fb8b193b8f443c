from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given

from conftest import CORPUS, any_terms, load
from probxform.errors import ParseError, UnknownPrimitive
from probxform.ir import (
    And, Bind, Fst, Lam, Less, Lit, Name, Uniform, Var, Weight, alpha_equal,
)
from probxform.syntax import parse, parse_with_spans, pretty

KALMAN_SRC = Path("src/probxform/programs/kalman.ppt").read_text()


def test_parse_bind():
    x = Name("x")
    assert parse("x <~ Uniform(0, 2); Uniform(x, 3)") == \
        Bind(x, Uniform(Lit(0), Lit(2)), Uniform(Var(x), Lit(3)))


def test_dirac_sugar():
    assert parse("Dirac(8)") == Weight(Lit(1), Lit(8))
    assert pretty(Weight(Lit(1), Lit(8))) == "Dirac(8)"


def test_tuple_binder_desugars_to_projection():
    e = parse("Lam((m1,m2), Dirac(m1))")
    assert isinstance(e, Lam)
    assert e.body == Weight(Lit(1), Fst(Var(e.var)))


def test_decimal_literals_are_exact():
    assert parse("0.7") == Lit(Fraction(7, 10))


def test_comparison_chain():
    e = parse("0 < x < 2")
    assert isinstance(e, And) and all(isinstance(c, Less) for c in (e.left, e.right))


def test_comments_and_whitespace():
    assert parse("# hello\nx <~\n  Uniform(0, 2);   # tail\nDirac(x)") == parse("x <~ Uniform(0,2); Dirac(x)")


def test_kalman_pretty_layout():
    printed = pretty(parse(KALMAN_SRC))
    squash = lambda s: "".join(line.split("#")[0] for line in s.splitlines()).replace(" ", "")
    assert squash(printed) == squash(KALMAN_SRC)


def test_tuple_binder_recovered_in_output(kalman_progs):
    assert pretty(kalman_progs.kalman5).startswith("Lam((o0, o1),\n  Lam((old0, old1),")


@pytest.mark.parametrize("src,err", [
    ("Foo(1)", UnknownPrimitive),
    ("x <~ ; 3", ParseError),
    ("1 +", ParseError),
    ("Uniform(0, 1", ParseError),
])
def test_parse_errors_carry_spans(src, err):
    with pytest.raises(err) as info:
        parse(src)
    span = info.value.span
    assert span is not None and span.start <= span.end


def test_spans_attached():
    e, spans = parse_with_spans("x <~ Uniform(0, 2); Uniform(x, 3)")
    assert id(e) in spans
    assert spans[id(e.rhs)].col_start == 6


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_corpus_round_trip(path):
    e = load(path)
    assert alpha_equal(parse(pretty(e)), e)


@given(any_terms)
def test_round_trip_random(e):
    assert alpha_equal(parse(pretty(e)), e)


@given(any_terms)
def test_pretty_is_stable(e):
    s = pretty(e)
    assert pretty(parse(s)) == s


def test_tuple_pattern_in_bind():
    e = parse("(m, (a, b)) <~ Dirac((1, (2, 3))); Dirac(m + a*b)")
    assert isinstance(e, Bind)
    assert pretty(e).startswith("(p0, (p1, p2)) <~ ")
    assert alpha_equal(parse(pretty(e)), e)
