"""State-clock logic formulae and their concrete syntax.

Grammar (loosest binding first)::

    psi := psi -> psi | psi '|' psi | psi & psi | psi U psi | psi S psi
         | !psi | next[~c] psi | last[~c] psi | p | true | false | (psi)

``U`` and ``S`` are right associative.  Constants are non-negative integers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional

CMPS = ("<=", ">=", "<", ">", "=")


class SclFormula:
    def __str__(self):
        return pretty(self)


@dataclass(frozen=True)
class Prop(SclFormula):
    name: str


@dataclass(frozen=True)
class TrueS(SclFormula):
    pass


@dataclass(frozen=True)
class Not(SclFormula):
    arg: SclFormula


@dataclass(frozen=True)
class Or(SclFormula):
    left: SclFormula
    right: SclFormula


@dataclass(frozen=True)
class And(SclFormula):
    left: SclFormula
    right: SclFormula


@dataclass(frozen=True)
class Until(SclFormula):
    left: SclFormula
    right: SclFormula


@dataclass(frozen=True)
class Since(SclFormula):
    left: SclFormula
    right: SclFormula


@dataclass(frozen=True)
class Next(SclFormula):
    """Time until ``arg`` next becomes true (strictly later, attained) compares ``op c``."""

    op: str
    c: int
    arg: SclFormula

    def __post_init__(self):
        _check_bound(self.op, self.c)


@dataclass(frozen=True)
class Last(SclFormula):
    """Time since ``arg`` was last true (strictly earlier, attained) compares ``op c``."""

    op: str
    c: int
    arg: SclFormula

    def __post_init__(self):
        _check_bound(self.op, self.c)


def _check_bound(op, c):
    if op not in CMPS:
        raise ValueError(f"bad comparison {op!r}")
    if not isinstance(c, int) or isinstance(c, bool) or c < 0:
        raise ValueError(f"clock constants must be non-negative integers, got {c!r}")


def FalseS() -> SclFormula:
    return Not(TrueS())


def Implies(a: SclFormula, b: SclFormula) -> SclFormula:
    return Or(Not(a), b)


def children(f: SclFormula) -> tuple:
    if isinstance(f, Not):
        return (f.arg,)
    if isinstance(f, (Or, And, Until, Since)):
        return (f.left, f.right)
    if isinstance(f, (Next, Last)):
        return (f.arg,)
    return ()


def subformulas(f: SclFormula) -> list[SclFormula]:
    """Post-order list of distinct subformulae (children before parents)."""
    out: list[SclFormula] = []
    seen = set()

    def walk(g):
        for c in children(g):
            walk(c)
        if g not in seen:
            seen.add(g)
            out.append(g)

    walk(f)
    return out


def props(f: SclFormula) -> frozenset:
    return frozenset(g.name for g in subformulas(f) if isinstance(g, Prop))


def max_constant(f: SclFormula) -> int:
    return max((g.c for g in subformulas(f) if isinstance(g, (Next, Last))), default=0)


def scaled(f: SclFormula, k: int) -> SclFormula:
    """Multiply every clock constant by ``k`` (used when rescaling time)."""
    if isinstance(f, (Next, Last)):
        return type(f)(f.op, f.c * k, scaled(f.arg, k))
    if isinstance(f, (Prop, TrueS)):
        return f
    if isinstance(f, Not):
        return Not(scaled(f.arg, k))
    return type(f)(scaled(f.left, k), scaled(f.right, k))


def pretty(f: SclFormula) -> str:
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, TrueS):
        return "true"
    if isinstance(f, Not):
        if isinstance(f.arg, TrueS):
            return "false"
        return f"!{_atomic(f.arg)}"
    if isinstance(f, Next):
        return f"next[{f.op}{f.c}] {_atomic(f.arg)}"
    if isinstance(f, Last):
        return f"last[{f.op}{f.c}] {_atomic(f.arg)}"
    sym = {Or: "|", And: "&", Until: "U", Since: "S"}[type(f)]
    return f"({pretty(f.left)} {sym} {pretty(f.right)})"


def _atomic(f):
    s = pretty(f)
    return s if isinstance(f, (Prop, TrueS, Not, Next, Last)) or s.startswith("(") else f"({s})"


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

class SclSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(->|<=|>=|[!|&()\[\]<>=])|(\d+(?:\.\d+)?)|([A-Za-z_][A-Za-z0-9_]*))")


def _tokenize(text):
    out, pos = [], 0
    while pos < len(text):
        if not text[pos:].strip():
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise SclSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastindex)
        kind = ("op", "num", "name")[m.lastindex - 1]
        out.append((kind, m.group(m.lastindex), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text, known: Optional[frozenset]):
        self.toks = _tokenize(text)
        self.i = 0
        self.known = known

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None, kind=None):
        tok = self.peek()
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            raise SclSyntaxError(f"expected {value or kind!r}, found {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def implication(self):
        left = self.disjunction()
        if self.peek()[1] == "->":
            self.take("->")
            return Implies(left, self.implication())
        return left

    def disjunction(self):
        left = self.conjunction()
        while self.peek()[1] == "|":
            self.take("|")
            left = Or(left, self.conjunction())
        return left

    def conjunction(self):
        left = self.temporal()
        while self.peek()[1] == "&":
            self.take("&")
            left = And(left, self.temporal())
        return left

    def temporal(self):
        left = self.unary()
        tok = self.peek()
        if tok[0] == "name" and tok[1] in ("U", "S"):
            self.take()
            right = self.temporal()
            return Until(left, right) if tok[1] == "U" else Since(left, right)
        return left

    def unary(self):
        kind, val, at = self.peek()
        if val == "!":
            self.take()
            return Not(self.unary())
        if kind == "name" and val in ("next", "last"):
            self.take()
            self.take("[")
            op = self.take(kind="op")[1]
            if op not in CMPS:
                raise SclSyntaxError(f"bad comparison {op!r}", at)
            ntok = self.take(kind="num")
            if not re.fullmatch(r"\d+", ntok[1]):
                raise SclSyntaxError(f"malformed constant {ntok[1]!r}: integers only", ntok[2])
            self.take("]")
            arg = self.unary()
            return (Next if val == "next" else Last)(op, int(ntok[1]), arg)
        if val == "(":
            self.take()
            f = self.implication()
            self.take(")")
            return f
        if kind == "name" and val not in ("U", "S"):
            self.take()
            if val == "true":
                return TrueS()
            if val == "false":
                return FalseS()
            if self.known is not None and val not in self.known:
                raise SclSyntaxError(f"unknown proposition {val!r}", at)
            return Prop(val)
        raise SclSyntaxError(f"unexpected {val or 'end of input'!r}", at)


def parse_scl(text: str, atlas=None) -> SclFormula:
    """Parse; when ``atlas`` (ids or a PropositionAtlas) is given, names must resolve in it."""
    known = None
    if atlas is not None:
        known = frozenset(atlas.ids if hasattr(atlas, "ids") else atlas)
    p = _Parser(text, known)
    f = p.implication()
    kind, val, at = p.peek()
    if kind != "end":
        raise SclSyntaxError(f"trailing input {val!r}", at)
    return f


def random_formula(rng, props: Iterable[str], depth: int = 3, max_const: int = 3,
                   max_timed: int = 2) -> SclFormula:
    """Random formula generator used by property suites."""
    props = list(props)
    budget = [max_timed]

    def gen(d):
        r = rng.random()
        if d == 0 or r < 0.25:
            return Prop(rng.choice(props))
        kinds = ["not", "or", "and", "until", "since"]
        if budget[0] > 0:
            kinds += ["next", "last", "next"]
        k = rng.choice(kinds)
        if k == "not":
            return Not(gen(d - 1))
        if k in ("next", "last"):
            budget[0] -= 1
            op = rng.choice(CMPS)
            return (Next if k == "next" else Last)(op, rng.randint(0, max_const) if op != "=" else rng.randint(1, max_const), gen(d - 1))
        cls = {"or": Or, "and": And, "until": Until, "since": Since}[k]
        return cls(gen(d - 1), gen(d - 1))

    return gen(depth)
