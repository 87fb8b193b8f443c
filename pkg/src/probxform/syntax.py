"""Concrete syntax: a recursive-descent parser and a precedence-aware printer.

The accepted grammar is documented in ``docs/grammar.md``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import ParseError, UnknownPrimitive
from .ir import (
    Add, And, App, Beta, Bind, BoolLit, Categorical, Const, Div, Equal, Exp, Expr,
    Fst, Gamma, GammaFn, If, Int, Lam, Less, Lit, Log, Mul, Name, Neg, Normal, Not,
    Pair, Pow, Snd, Sqrt, Sub, Sum, Superpose, Uniform, UnitLit, Var, Weight,
    free_vars, fresh, subst,
)


@dataclass(frozen=True)
class SourceSpan:
    line: int
    col_start: int
    col_end: int
    start: int
    end: int

    def __str__(self):
        return f"{self.line}:{self.col_start}-{self.col_end}"


_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<num>\d+//\d+|\d+(?:\.\d+)?(?:[eE][-+]?\d+)?|\.\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op><~|==|&&|[-+*/^<(),;\[\]])
""", re.VERBOSE)

MEASURE_CALLS = {"Uniform": Uniform, "Normal": Normal, "Gamma": Gamma, "Beta": Beta}
UNARY_CALLS = {"exp": Exp, "log": Log, "sqrt": Sqrt, "gamma": GammaFn, "not": Not}
KEYWORDS = set(MEASURE_CALLS) | set(UNARY_CALLS) | {
    "Weight", "Dirac", "Categorical", "Superpose", "If", "Sum", "Int", "Lam", "App",
    "pi", "inf", "Unit", "true", "false",
}


@dataclass
class _Tok:
    kind: str
    text: str
    start: int
    end: int


def _tokenize(text: str) -> list[_Tok]:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", _span(text, pos, pos + 1))
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), m.start(), m.end()))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text), len(text)))
    return toks


def _span(text: str, start: int, end: int) -> SourceSpan:
    line = text.count("\n", 0, start) + 1
    col = start - (text.rfind("\n", 0, start) + 1) + 1
    return SourceSpan(line, col, col + max(end - start, 1), start, end)


def _number(text: str) -> Fraction:
    if "//" in text:
        n, d = text.split("//")
        return Fraction(int(n), int(d))
    return Fraction(text)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.spans: dict[int, SourceSpan] = {}
        self.scope: list[dict[str, Expr]] = []

    # token helpers
    def peek(self, k=0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, k=0) -> bool:
        t = self.peek(k)
        return t.kind in ("op", "id") and t.text == text

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text) -> _Tok:
        t = self.peek()
        if not self.at(text):
            found = t.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", _span(self.text, t.start, t.end))
        return self.next()

    def mark(self, e: Expr, start: int) -> Expr:
        end = self.toks[self.i - 1].end if self.i else start
        self.spans.setdefault(id(e), _span(self.text, start, end))
        return e

    # name resolution: tuple binders map source names to projections
    def lookup(self, ident: str) -> Expr:
        for frame in reversed(self.scope):
            if ident in frame:
                return frame[ident]
        return Var(Name(ident))

    def binder(self):
        """Parse a binder; returns (Name, frame) where frame maps source names."""
        if self.at("("):
            pattern = self.pattern()
            p = fresh("p")
            frame: dict[str, Expr] = {}

            def bind(pat, target):
                if isinstance(pat, str):
                    frame[pat] = target
                else:
                    bind(pat[0], Fst(target))
                    bind(pat[1], Snd(target))

            bind(pattern, Var(p))
            return p, frame
        t = self.next()
        if t.kind != "id" or t.text in KEYWORDS:
            raise ParseError(f"expected a variable name, found {t.text!r}", _span(self.text, t.start, t.end))
        return Name(t.text), {t.text: Var(Name(t.text))}

    def pattern(self):
        self.expect("(")
        left = self.pattern() if self.at("(") else self.ident()
        self.expect(",")
        right = self.pattern() if self.at("(") else self.ident()
        self.expect(")")
        return (left, right)

    def ident(self) -> str:
        t = self.next()
        if t.kind != "id" or t.text in KEYWORDS:
            raise ParseError(f"expected a variable name, found {t.text!r}", _span(self.text, t.start, t.end))
        return t.text

    def scoped(self, frame, parse):
        self.scope.append(frame)
        try:
            return parse()
        finally:
            self.scope.pop()

    # grammar
    def program(self) -> Expr:
        e = self.expr()
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(f"unexpected {t.text!r}", _span(self.text, t.start, t.end))
        return e

    def expr(self) -> Expr:
        start = self.peek().start
        if (self.peek().kind == "id" and self.at("<~", 1)) or self._pattern_bind_ahead():
            name, frame = self.binder()
            self.expect("<~")
            rhs = self.conj()
            self.expect(";")
            body = self.scoped(frame, self.expr)
            return self.mark(Bind(name, rhs, body), start)
        return self.conj()

    def _pattern_bind_ahead(self) -> bool:
        if not self.at("("):
            return False
        save = self.i
        try:
            self.pattern()
            return self.at("<~")
        except ParseError:
            return False
        finally:
            self.i = save

    def conj(self) -> Expr:
        start = self.peek().start
        e = self.comparison()
        while self.at("&&"):
            self.next()
            e = self.mark(And(e, self.comparison()), start)
        return e

    def comparison(self) -> Expr:
        start = self.peek().start
        e = self.additive()
        if self.at("=="):
            self.next()
            return self.mark(Equal(e, self.additive()), start)
        if self.at("<"):
            terms = [e]
            while self.at("<"):
                self.next()
                terms.append(self.additive())
            out = Less(terms[0], terms[1])
            for a, b in zip(terms[1:], terms[2:]):
                out = And(out, Less(a, b))
            return self.mark(out, start)
        return e

    def additive(self) -> Expr:
        start = self.peek().start
        e = self.multiplicative()
        while self.at("+") or self.at("-"):
            op = self.next().text
            rhs = self.multiplicative()
            e = self.mark(Add(e, rhs) if op == "+" else Sub(e, rhs), start)
        return e

    def multiplicative(self) -> Expr:
        start = self.peek().start
        e = self.unary()
        while self.at("*") or self.at("/"):
            op = self.next().text
            rhs = self.unary()
            e = self.mark(Mul(e, rhs) if op == "*" else Div(e, rhs), start)
        return e

    def unary(self) -> Expr:
        start = self.peek().start
        if self.at("-"):
            self.next()
            if self.peek().kind == "num" and not self.at("^", 1) and not self.at("[", 1):
                t = self.next()
                return self.mark(Lit(-_number(t.text)), start)
            return self.mark(Neg(self.unary()), start)
        return self.power()

    def power(self) -> Expr:
        start = self.peek().start
        base = self.postfix()
        if self.at("^"):
            self.next()
            return self.mark(Pow(base, self.unary()), start)
        return base

    def postfix(self) -> Expr:
        start = self.peek().start
        e = self.atom()
        while self.at("["):
            self.next()
            t = self.next()
            if t.text not in ("0", "1"):
                raise ParseError("projection index must be 0 or 1", _span(self.text, t.start, t.end))
            self.expect("]")
            e = self.mark(Fst(e) if t.text == "0" else Snd(e), start)
        return e

    def args(self, n: int) -> list[Expr]:
        self.expect("(")
        out = [self.expr()]
        for _ in range(n - 1):
            self.expect(",")
            out.append(self.expr())
        self.expect(")")
        return out

    def pairs(self) -> tuple:
        self.expect("(")
        out = []
        while not self.at(")"):
            self.expect("(")
            w = self.expr()
            self.expect(",")
            v = self.expr()
            self.expect(")")
            out.append((w, v))
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        return tuple(out)

    def atom(self) -> Expr:
        t = self.peek()
        start = t.start
        if t.kind == "num":
            self.next()
            return self.mark(Lit(_number(t.text)), start)
        if self.at("("):
            self.next()
            first = self.expr()
            if self.at(","):
                self.next()
                second = self.expr()
                self.expect(")")
                return self.mark(Pair(first, second), start)
            self.expect(")")
            return first
        if t.kind != "id":
            raise ParseError(f"unexpected {t.text or 'end of input'!r}", _span(self.text, t.start, t.end))
        word = t.text
        self.next()
        if word == "pi":
            return self.mark(Const("pi"), start)
        if word == "inf":
            return self.mark(Const("inf"), start)
        if word == "Unit":
            return self.mark(UnitLit(), start)
        if word in ("true", "false"):
            return self.mark(BoolLit(word == "true"), start)
        if word in MEASURE_CALLS:
            a, b = self.args(2)
            return self.mark(MEASURE_CALLS[word](a, b), start)
        if word in UNARY_CALLS:
            (a,) = self.args(1)
            return self.mark(UNARY_CALLS[word](a), start)
        if word == "Weight":
            w, e = self.args(2)
            return self.mark(Weight(w, e), start)
        if word == "Dirac":
            (e,) = self.args(1)
            return self.mark(Weight(Lit(Fraction(1)), e), start)
        if word == "If":
            c, a, b = self.args(3)
            return self.mark(If(c, a, b), start)
        if word == "App":
            f, a = self.args(2)
            return self.mark(App(f, a), start)
        if word == "Categorical":
            return self.mark(Categorical(self.pairs()), start)
        if word == "Superpose":
            return self.mark(Superpose(self.pairs()), start)
        if word == "Lam":
            self.expect("(")
            name, frame = self.binder()
            self.expect(",")
            body = self.scoped(frame, self.expr)
            self.expect(")")
            return self.mark(Lam(name, body), start)
        if word in ("Int", "Sum"):
            self.expect("(")
            lo = self.expr()
            self.expect(",")
            hi = self.expr()
            self.expect(",")
            name = Name(self.ident())
            self.expect(",")
            body = self.scoped({name.text: Var(name)}, self.expr)
            self.expect(")")
            return self.mark((Int if word == "Int" else Sum)(lo, hi, name, body), start)
        if self.at("("):
            raise UnknownPrimitive(f"unknown primitive {word!r}", _span(self.text, t.start, t.end))
        return self.mark(self.lookup(word), start)


def parse(text: str) -> Expr:
    return _Parser(text).program()


def parse_with_spans(text: str) -> tuple[Expr, dict[int, SourceSpan]]:
    p = _Parser(text)
    e = p.program()
    return e, p.spans


# -- printing ----------------------------------------------------------------

P_BIND, P_AND, P_CMP, P_ADD, P_MUL, P_UNARY, P_POW, P_POSTFIX, P_ATOM = range(9)


def _lit(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    d = q.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d != 1:
        return f"{q.numerator}//{q.denominator}"
    sign = "-" if q < 0 else ""
    q = abs(q)
    whole, frac = divmod(q.numerator, q.denominator)
    digits = ""
    while frac:
        frac *= 10
        digit, frac = divmod(frac, q.denominator)
        digits += str(digit)
    return f"{sign}{whole}.{digits}"


def _proj_path(e: Expr):
    path = []
    while isinstance(e, (Fst, Snd)):
        path.append(0 if isinstance(e, Fst) else 1)
        e = e.arg
    return e, tuple(reversed(path))


def _pattern_uses(body: Expr, p: Name):
    """Projection paths under which ``p`` occurs, or None if it occurs bare."""
    uses = set()

    def visit(e, bound):
        if isinstance(e, (Fst, Snd)):
            root, path = _proj_path(e)
            if isinstance(root, Var):
                if root.name == p and p not in bound:
                    uses.add(path)
                return True
            return visit(root, bound)
        if isinstance(e, Var):
            if e.name == p and p not in bound:
                return False
            return True
        from .ir import BINDERS, children
        from .ir import _EXPR_FIELDS
        if type(e) in BINDERS:
            body_field = BINDERS[type(e)]
            for f in _EXPR_FIELDS[type(e)]:
                inner = bound | {e.var} if f == body_field else bound
                if not visit(getattr(e, f), inner):
                    return False
            return True
        return all(visit(k, bound) for k in children(e))

    if not visit(body, frozenset()) or not uses:
        return None
    return uses


def _recover_pattern(lam: Lam):
    """Turn ``Lam(p, ... p[0] ... p[1] ...)`` back into a tuple binder."""
    uses = _pattern_uses(lam.body, lam.var)
    if uses is None:
        return None
    taken = {n.text for n in free_vars(lam.body)} | _all_binder_texts(lam.body)
    base = lam.var.text
    counter = iter(range(1 << 30))

    def build(path):
        if path in uses or not any(u[:len(path)] == path and len(u) > len(path) for u in uses):
            name = base + str(next(counter))
            while name in taken:
                name += "_"
            taken.add(name)
            return Name(name), {path: Name(name)}
        left, lm = build(path + (0,))
        right, rm = build(path + (1,))
        return (left, right), {**lm, **rm}

    pat, leaves = build(())
    if isinstance(pat, Name):
        return None
    mapping = {}
    body = lam.body

    def replace(e):
        from .ir import map_expr
        def f(t):
            if isinstance(t, (Fst, Snd)):
                root, path = _proj_path(t)
                if isinstance(root, Var) and root.name == lam.var:
                    for k in range(len(path), -1, -1):
                        if path[:k] in leaves:
                            out = Var(leaves[path[:k]])
                            for step in path[k:]:
                                out = Fst(out) if step == 0 else Snd(out)
                            return out
            return t
        return map_expr(e, f)

    body = replace(body)
    del mapping
    return pat, body


def _all_binder_texts(e: Expr) -> set:
    from .ir import BINDERS, walk
    return {t.var.text for t in walk(e) if type(t) in BINDERS}


def _pat_str(pat) -> str:
    if isinstance(pat, Name):
        return str(pat)
    return f"({_pat_str(pat[0])}, {_pat_str(pat[1])})"


class _Printer:
    def __init__(self, width: int = 80):
        self.width = width

    def pp(self, e: Expr, prec: int = P_BIND, indent: str = "") -> str:
        s, p = self.go(e, indent)
        return f"({s})" if p < prec else s

    def go(self, e: Expr, ind: str) -> tuple[str, int]:
        pp = self.pp
        match e:
            case Var(name):
                return str(name), P_ATOM
            case Lit(q):
                return _lit(q), (P_UNARY if q < 0 else P_ATOM)
            case Const(name):
                return name, P_ATOM
            case BoolLit(v):
                return ("true" if v else "false"), P_ATOM
            case UnitLit():
                return "Unit", P_ATOM
            case Neg(a):
                if isinstance(a, Lit) and a.value >= 0:
                    return f"-({pp(a)})", P_UNARY
                inner = pp(a, P_UNARY, ind)
                return ("-(" + inner + ")" if inner.startswith("-") else "-" + inner), P_UNARY
            case Add(a, b) | Sub(a, b):
                op = "+" if isinstance(e, Add) else "-"
                rhs = pp(b, P_ADD + 1, ind)
                if rhs.startswith("-"):
                    return f"{pp(a, P_ADD, ind)} {op} {rhs}", P_ADD
                return f"{pp(a, P_ADD, ind)}{op}{rhs}", P_ADD
            case Mul(a, b):
                return f"{pp(a, P_MUL, ind)}*{pp(b, P_MUL + 1, ind)}", P_MUL
            case Div(a, b):
                return f"{pp(a, P_MUL, ind)}/{pp(b, P_MUL + 1, ind)}", P_MUL
            case Pow(a, b):
                return f"{pp(a, P_POSTFIX, ind)}^{pp(b, P_UNARY, ind)}", P_POW
            case Less(a, b):
                return f"{pp(a, P_ADD, ind)}<{pp(b, P_ADD, ind)}", P_CMP
            case And(Less(a, b), Less(b2, c)) if b == b2:
                return f"{pp(a, P_ADD, ind)}<{pp(b, P_ADD, ind)}<{pp(c, P_ADD, ind)}", P_CMP
            case Equal(a, b):
                return f"{pp(a, P_ADD, ind)}=={pp(b, P_ADD, ind)}", P_CMP
            case And(a, b):
                return f"{pp(a, P_AND, ind)} && {pp(b, P_CMP, ind)}", P_AND
            case Not(a):
                return f"not({pp(a)})", P_ATOM
            case Exp(a):
                return f"exp({pp(a, P_BIND, ind)})", P_ATOM
            case Log(a):
                return f"log({pp(a, P_BIND, ind)})", P_ATOM
            case Sqrt(a):
                return f"sqrt({pp(a, P_BIND, ind)})", P_ATOM
            case GammaFn(a):
                return f"gamma({pp(a, P_BIND, ind)})", P_ATOM
            case If(c, a, b):
                return self.call("If", [c, a, b], ind), P_ATOM
            case Sum(lo, hi, x, body) | Int(lo, hi, x, body):
                head = "Int" if isinstance(e, Int) else "Sum"
                return f"{head}({pp(lo)}, {pp(hi)}, {x}, {pp(body, P_BIND, ind)})", P_ATOM
            case Lam(x, body):
                rec = _recover_pattern(e)
                if rec is not None:
                    pat, body = rec
                    binder = _pat_str(pat)
                else:
                    binder = str(x)
                inner = ind + "  "
                text = pp(body, P_BIND, inner)
                if "\n" in text:
                    return f"Lam({binder},\n{inner}{text})", P_ATOM
                return f"Lam({binder}, {text})", P_ATOM
            case App(f, a):
                return f"App({pp(f, P_BIND, ind)}, {pp(a, P_BIND, ind)})", P_ATOM
            case Pair(a, b):
                return f"({pp(a, P_BIND, ind)}, {pp(b, P_BIND, ind)})", P_ATOM
            case Fst(a):
                return f"{pp(a, P_POSTFIX, ind)}[0]", P_POSTFIX
            case Snd(a):
                return f"{pp(a, P_POSTFIX, ind)}[1]", P_POSTFIX
            case Uniform(a, b) | Normal(a, b) | Gamma(a, b) | Beta(a, b):
                return f"{type(e).__name__}({pp(a)}, {pp(b)})", P_ATOM
            case Weight(Lit(q), pt) if q == 1:
                return f"Dirac({pp(pt, P_BIND, ind)})", P_ATOM
            case Weight(w, pt):
                return self.call("Weight", [w, pt], ind), P_ATOM
            case Categorical(pairs) | Superpose(pairs):
                return self.pairs(type(e).__name__, pairs, ind), P_ATOM
            case Bind(x, rhs, body):
                r = pp(rhs, P_AND, ind + "  ")
                rec = _recover_pattern(Lam(x, body))
                binder = x
                if rec is not None:
                    pat, body = rec
                    binder = _pat_str(pat)
                return f"{binder} <~ {r};\n{ind}{pp(body, P_BIND, ind)}", P_BIND
        raise TypeError(f"cannot print {e!r}")

    def call(self, head: str, args, ind: str) -> str:
        inner = ind + "  "
        parts = [self.pp(a, P_BIND, inner) for a in args]
        flat = f"{head}({', '.join(parts)})"
        if "\n" not in flat and len(flat) + len(ind) <= self.width:
            return flat
        return f"{head}(" + (",\n" + inner).join(parts) + ")"

    def pairs(self, head: str, pairs, ind: str) -> str:
        inner = ind + "  "
        parts = []
        for w, v in pairs:
            body = self.pp(v, P_BIND, inner + "  ")
            parts.append(f"({self.pp(w, P_BIND, inner)}, {body})")
        flat = f"{head}({', '.join(parts)})"
        if "\n" not in flat and len(flat) + len(ind) <= self.width:
            return flat
        return f"{head}(\n{inner}" + (",\n" + inner).join(parts) + ")"


def pretty(e: Expr, width: int = 80) -> str:
    return _Printer(width).pp(e)
