"""Multi-lane spatial logic with scopes: syntax, model checking on snapshots,
and derivation of timed state sequences from snapshot evolutions.

Concrete syntax::

    free | true | false | re(A) | cl(c) | l = 21 | l <= 21 | c = d
    !phi | phi & psi | phi | psi
    <phi1 ~ phi2 ~ ...>      horizontal chop (right nested)
    [phi1 / phi2]            vertical chop, phi1 on the lower lanes
    somewhere(phi) | scope{A,B}: phi | exists c. phi
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence

from .sequence import Interval, Phase, TimedStateSequence
from .traffic import (CarGeometry, DynamicBounds, TimedWord, TrafficSnapshot, run_word)

TOL = 1e-9

_CMPS = ("<=", ">=", "<", ">", "=")


def compare(lhs: float, op: str, rhs: float, tol: float = TOL) -> bool:
    if op == "=":
        return abs(lhs - rhs) <= tol
    if op == "<":
        return lhs < rhs - tol
    if op == "<=":
        return lhs <= rhs + tol
    if op == ">":
        return lhs > rhs + tol
    if op == ">=":
        return lhs >= rhs - tol
    raise ValueError(f"unknown comparison {op!r}")


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

class Formula:
    def __str__(self):
        return pretty(self)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class VarEq(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Free(Formula):
    pass


@dataclass(frozen=True)
class Re(Formula):
    car: str


@dataclass(frozen=True)
class Cl(Formula):
    car: str


@dataclass(frozen=True)
class LengthCmp(Formula):
    op: str
    k: float

    def __post_init__(self):
        if self.op not in _CMPS:
            raise ValueError(f"bad comparison {self.op}")
        if self.k < 0:
            raise ValueError("length constants must be non-negative")


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class HChop(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class VChop(Formula):
    lower: Formula
    upper: Formula


@dataclass(frozen=True)
class Scope(Formula):
    cars: tuple[str, ...]
    body: Formula


@dataclass(frozen=True)
class Somewhere(Formula):
    body: Formula


def pretty(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Free):
        return "free"
    if isinstance(f, VarEq):
        return f"{f.left} = {f.right}"
    if isinstance(f, Re):
        return f"re({f.car})"
    if isinstance(f, Cl):
        return f"cl({f.car})"
    if isinstance(f, LengthCmp):
        k = int(f.k) if float(f.k).is_integer() else f.k
        return f"l {f.op} {k}"
    if isinstance(f, Not):
        return f"!{_wrap(f.arg)}"
    if isinstance(f, And):
        return f"({pretty(f.left)} & {pretty(f.right)})"
    if isinstance(f, Or):
        return f"({pretty(f.left)} | {pretty(f.right)})"
    if isinstance(f, Exists):
        return f"(exists {f.var}. {pretty(f.body)})"
    if isinstance(f, Scope):
        return f"(scope{{{','.join(f.cars)}}}: {pretty(f.body)})"
    if isinstance(f, Somewhere):
        return f"somewhere({pretty(f.body)})"
    if isinstance(f, HChop):
        parts = [f.left]
        rest = f.right
        while isinstance(rest, HChop):
            parts.append(rest.left)
            rest = rest.right
        parts.append(rest)
        return "<" + " ~ ".join(pretty(p) for p in parts) + ">"
    if isinstance(f, VChop):
        return f"[{pretty(f.lower)} / {pretty(f.upper)}]"
    raise TypeError(f)


def _wrap(f: Formula) -> str:
    s = pretty(f)
    if isinstance(f, (VarEq, LengthCmp)):
        return f"({s})"
    return s


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

class MlslsSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(<=|>=|[<>=!&|~/()\[\]{}:.,])|(\d+(?:\.\d*)?|\.\d+)|([A-Za-z_][A-Za-z0-9_']*))")


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise MlslsSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastindex)
        if m.group(1):
            out.append(("op", m.group(1), start))
        elif m.group(2):
            out.append(("num", m.group(2), start))
        else:
            out.append(("name", m.group(3), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self, value=None, kind=None):
        tok = self.peek()
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            want = value or kind
            raise MlslsSyntaxError(f"expected {want!r}, found {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def formula(self):
        left = self.conj()
        while self.peek()[1] == "|":
            self.take("|")
            left = Or(left, self.conj())
        return left

    def conj(self):
        left = self.unary()
        while self.peek()[1] == "&":
            self.take("&")
            left = And(left, self.unary())
        return left

    def unary(self):
        kind, val, _ = self.peek()
        if val == "!":
            self.take("!")
            return Not(self.unary())
        if kind == "name" and val == "exists":
            self.take()
            var = self.take(kind="name")[1]
            self.take(".")
            return Exists(var, self.formula())
        if kind == "name" and val == "scope":
            self.take()
            self.take("{")
            cars = []
            if self.peek()[1] != "}":
                cars.append(self.take(kind="name")[1])
                while self.peek()[1] == ",":
                    self.take(",")
                    cars.append(self.take(kind="name")[1])
            self.take("}")
            self.take(":")
            return Scope(tuple(cars), self.formula())
        return self.atom()

    def atom(self):
        kind, val, at = self.peek()
        if val == "(":
            self.take("(")
            f = self.formula()
            self.take(")")
            return f
        if val == "<":
            self.take("<")
            parts = [self.formula()]
            while self.peek()[1] == "~":
                self.take("~")
                parts.append(self.formula())
            self.take(">")
            if len(parts) < 2:
                raise MlslsSyntaxError("horizontal chop needs at least two operands", at)
            f = parts[-1]
            for p in reversed(parts[:-1]):
                f = HChop(p, f)
            return f
        if val == "[":
            self.take("[")
            lower = self.formula()
            self.take("/")
            upper = self.formula()
            self.take("]")
            return VChop(lower, upper)
        if kind != "name":
            raise MlslsSyntaxError(f"unexpected {val or 'end of input'!r}", at)
        self.take()
        if val == "free":
            return Free()
        if val == "true":
            return TrueF()
        if val == "false":
            return FalseF()
        if val in ("re", "cl"):
            self.take("(")
            car = self.take(kind="name")[1]
            self.take(")")
            return Re(car) if val == "re" else Cl(car)
        if val == "somewhere":
            self.take("(")
            f = self.formula()
            self.take(")")
            return Somewhere(f)
        if val == "l" and self.peek()[1] in _CMPS:
            op = self.take()[1]
            num = self.take(kind="num")[1]
            return LengthCmp(op, float(num))
        if self.peek()[1] == "=":
            self.take("=")
            return VarEq(val, self.take(kind="name")[1])
        raise MlslsSyntaxError(f"unexpected name {val!r}", at)


def parse_mlsls(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    kind, val, at = p.peek()
    if kind != "end":
        raise MlslsSyntaxError(f"trailing input {val!r}", at)
    return f


# --------------------------------------------------------------------------
# views and evaluation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class View:
    lanes: tuple[int, int]
    extent: tuple[float, float]
    owner: Optional[str] = None

    def __post_init__(self):
        if self.extent[0] > self.extent[1]:
            raise ValueError("view extent must satisfy a <= b")
        if self.lanes[0] > self.lanes[1]:
            raise ValueError("view lanes must be a non-empty range")


def default_view(ts: TrafficSnapshot, geom: Mapping[str, CarGeometry]) -> View:
    lo = min(ts.pos[c] for c in ts.cars)
    hi = max(ts.pos[c] + geom[c].size + geom[c].braking_distance for c in ts.cars)
    return View((1, ts.lane_count), (lo, hi))


class UnboundVariable(ValueError):
    pass


def free_cars(f: Formula, bound=frozenset()) -> set[str]:
    if isinstance(f, (Re, Cl)):
        return set() if f.car in bound else {f.car}
    if isinstance(f, VarEq):
        return {x for x in (f.left, f.right) if x not in bound}
    if isinstance(f, Exists):
        return free_cars(f.body, bound | {f.var})
    if isinstance(f, Scope):
        return {c for c in f.cars if c not in bound} | free_cars(f.body, bound)
    return set().union(*(free_cars(c, bound) for c in _children(f)))


def _children(f: Formula):
    if isinstance(f, Not):
        return (f.arg,)
    if isinstance(f, (And, Or, HChop)):
        return (f.left, f.right)
    if isinstance(f, VChop):
        return (f.lower, f.upper)
    if isinstance(f, (Exists, Scope, Somewhere)):
        return (f.body,)
    return ()


def length_constants(f: Formula) -> set[float]:
    out = {f.k} if isinstance(f, LengthCmp) else set()
    for c in _children(f):
        out |= length_constants(c)
    return out


class _Checker:
    def __init__(self, ts, geom, tol):
        self.ts = ts
        self.geom = geom
        self.tol = tol

    def resolve(self, name, val):
        if name in val:
            return val[name]
        if name in self.ts.res:
            return name
        raise UnboundVariable(f"unbound car variable {name!r}")

    def occupancy(self, car):
        p = self.ts.pos[car]
        return p, p + self.geom[car].size

    def check(self, f, view: View, val, scope, cands) -> bool:
        tol = self.tol
        (l1, l2), (a, b) = view.lanes, view.extent
        single = l1 == l2
        if isinstance(f, TrueF):
            return True
        if isinstance(f, FalseF):
            return False
        if isinstance(f, VarEq):
            return self.resolve(f.left, val) == self.resolve(f.right, val)
        if isinstance(f, (Re, Cl)):
            car = self.resolve(f.car, val)
            lanes = self.ts.res[car] if isinstance(f, Re) else self.ts.clm[car]
            if not single or b - a <= tol or l1 not in lanes:
                return False
            lo, hi = self.occupancy(car)
            return lo - tol <= a and b <= hi + tol
        if isinstance(f, Free):
            if not single or b - a <= tol:
                return False
            for car in scope:
                if l1 in self.ts.res[car] or l1 in self.ts.clm[car]:
                    lo, hi = self.occupancy(car)
                    if lo < b - tol and hi > a + tol:
                        return False
            return True
        if isinstance(f, LengthCmp):
            return compare(b - a, f.op, f.k, tol)
        if isinstance(f, Not):
            return not self.check(f.arg, view, val, scope, cands)
        if isinstance(f, And):
            return self.check(f.left, view, val, scope, cands) and self.check(f.right, view, val, scope, cands)
        if isinstance(f, Or):
            return self.check(f.left, view, val, scope, cands) or self.check(f.right, view, val, scope, cands)
        if isinstance(f, Exists):
            return any(self.check(f.body, view, {**val, f.var: c}, scope, cands) for c in scope)
        if isinstance(f, Scope):
            cars = tuple(self.resolve(c, val) for c in f.cars)
            return self.check(f.body, view, val, cars, cands)
        if isinstance(f, HChop):
            for m in _points_within(cands, a, b, tol):
                if (self.check(f.left, View(view.lanes, (a, m)), val, scope, cands)
                        and self.check(f.right, View(view.lanes, (m, b)), val, scope, cands)):
                    return True
            return False
        if isinstance(f, VChop):
            for j in range(l1, l2):
                if (self.check(f.lower, View((l1, j), view.extent), val, scope, cands)
                        and self.check(f.upper, View((j + 1, l2), view.extent), val, scope, cands)):
                    return True
            return False
        if isinstance(f, Somewhere):
            pts = _points_within(cands, a, b, tol)
            for lo_lane in range(l1, l2 + 1):
                for hi_lane in range(lo_lane, l2 + 1):
                    for i, c in enumerate(pts):
                        for d in pts[i:]:
                            if self.check(f.body, View((lo_lane, hi_lane), (c, d)), val, scope, cands):
                                return True
            return False
        raise TypeError(f"not an MLSLS formula: {f!r}")


def _points_within(cands, a, b, tol):
    pts = [a] + [x for x in cands if a + tol < x < b - tol] + [b]
    return sorted(set(pts))


def _candidates(ts, geom, view, consts):
    base = {view.extent[0], view.extent[1]}
    for c in ts.cars:
        lo = ts.pos[c]
        base |= {lo, lo + geom[c].size}
    pts = set(base)
    frontier = set(base)
    for _ in range(2):
        new = {p + s * k for p in frontier for k in consts for s in (1, -1)}
        frontier = new - pts
        pts |= new
    return sorted(pts)


def evaluate(ts: TrafficSnapshot, phi: Formula, geom: Mapping[str, CarGeometry], *,
             view: View | None = None, val: Mapping[str, str] | None = None,
             scope: Iterable[str] | None = None, tol: float = TOL) -> bool:
    """Satisfaction of ``phi`` on ``ts`` restricted to ``view``."""
    view = view or default_view(ts, geom)
    val = dict(val or {})
    scope = tuple(scope) if scope is not None else ts.cars
    consts = length_constants(phi)
    cands = _candidates(ts, geom, view, consts)
    return _Checker(ts, geom, tol).check(phi, view, val, scope, cands)


# --------------------------------------------------------------------------
# atlas and gap constraints
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PropositionAtlas:
    """Ground MLSLS formulae used as the proposition alphabet of a timed spec."""

    entries: tuple[tuple[str, Formula], ...]

    def __post_init__(self):
        ids = [i for i, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate proposition ids")
        for i, f in self.entries:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", i):
                raise ValueError(f"bad proposition id {i!r}")

    @classmethod
    def from_texts(cls, items: Mapping[str, str] | Sequence[tuple[str, str]]) -> "PropositionAtlas":
        items = items.items() if isinstance(items, Mapping) else items
        return cls(tuple((i, parse_mlsls(t)) for i, t in items))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.entries)

    def __getitem__(self, pid: str) -> Formula:
        for i, f in self.entries:
            if i == pid:
                return f
        raise KeyError(pid)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def merged(self, other: "PropositionAtlas") -> "PropositionAtlas":
        seen = dict(self.entries)
        out = list(self.entries)
        for i, f in other.entries:
            if i in seen:
                if seen[i] != f:
                    raise ValueError(f"proposition id {i!r} used for two different formulae")
                continue
            out.append((i, f))
        return PropositionAtlas(tuple(out))

    def check_ground(self, cars: Iterable[str]) -> None:
        cars = set(cars)
        for i, f in self.entries:
            extra = free_cars(f) - cars
            if extra:
                raise ValueError(f"atlas entry {i!r} has free variables {sorted(extra)}")


@dataclass(frozen=True)
class GapConstraint:
    """``lo (<|<=) gap(rear, front) (<|<=) hi``; infinite bounds allowed."""

    rear: str
    front: str
    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = True
    hi_closed: bool = True

    @property
    def pair(self) -> tuple[str, str]:
        return (self.rear, self.front)

    def is_empty(self, tol: float = 0.0) -> bool:
        if self.lo > self.hi + tol:
            return True
        if abs(self.lo - self.hi) <= tol and not (self.lo_closed and self.hi_closed):
            return True
        return False

    def intersect(self, other: "GapConstraint") -> "GapConstraint":
        assert self.pair == other.pair
        if self.lo > other.lo or (self.lo == other.lo and not self.lo_closed):
            lo, loc = self.lo, self.lo_closed
        else:
            lo, loc = other.lo, other.lo_closed
        if self.hi < other.hi or (self.hi == other.hi and not self.hi_closed):
            hi, hic = self.hi, self.hi_closed
        else:
            hi, hic = other.hi, other.hi_closed
        return GapConstraint(self.rear, self.front, lo, hi, loc, hic)

    def complement(self) -> list["GapConstraint"]:
        out = []
        if self.lo > -math.inf:
            out.append(GapConstraint(self.rear, self.front, -math.inf, self.lo, True, not self.lo_closed))
        if self.hi < math.inf:
            out.append(GapConstraint(self.rear, self.front, self.hi, math.inf, not self.hi_closed, True))
        return out

    def holds(self, g: float, tol: float = TOL) -> bool:
        lo_ok = g >= self.lo - tol if self.lo_closed else g > self.lo + tol
        hi_ok = g <= self.hi + tol if self.hi_closed else g < self.hi - tol
        return lo_ok and hi_ok

    def __str__(self):
        lb = "[" if self.lo_closed else "("
        rb = "]" if self.hi_closed else ")"
        return f"gap({self.rear},{self.front}) in {lb}{self.lo:g},{self.hi:g}{rb}"


def _length_interval(f: Formula):
    """Interval described by a conjunction of ``free`` and length atoms, or None."""
    if isinstance(f, Free):
        return (-math.inf, math.inf, True, True), True
    if isinstance(f, LengthCmp):
        k = f.k
        return {"=": (k, k, True, True), "<": (-math.inf, k, True, False), "<=": (-math.inf, k, True, True),
                ">": (k, math.inf, False, True), ">=": (k, math.inf, True, True)}[f.op], False
    if isinstance(f, And):
        left, right = _length_interval(f.left), _length_interval(f.right)
        if left is None or right is None:
            return None
        a = GapConstraint("", "", *left[0]).intersect(GapConstraint("", "", *right[0]))
        return (a.lo, a.hi, a.lo_closed, a.hi_closed), left[1] or right[1]
    return None


def gap_constraint_of(f: Formula) -> Optional[GapConstraint]:
    """Recognise ``somewhere(<re(X) ~ (free & length atoms) ~ re(Y)>)``."""
    if not isinstance(f, Somewhere):
        return None
    body = f.body
    parts = []
    while isinstance(body, HChop):
        parts.append(body.left)
        body = body.right
    parts.append(body)
    if len(parts) == 2 and isinstance(parts[0], HChop):
        return None
    if len(parts) != 3 or not isinstance(parts[0], Re) or not isinstance(parts[2], Re):
        return None
    info = _length_interval(parts[1])
    if info is None or not info[1]:
        return None
    (lo, hi, loc, hic), _ = info
    lo = max(lo, 0.0) if lo != -math.inf else 0.0
    return GapConstraint(parts[0].car, parts[2].car, lo, hi, loc if lo > 0 else True, hic)


# --------------------------------------------------------------------------
# timed state sequences of an evolution
# --------------------------------------------------------------------------

def _roots(c2: float, c1: float, c0: float, lo: float, hi: float, tol: float) -> list[float]:
    """Real roots of ``c2 t^2 + c1 t + c0`` strictly inside ``(lo, hi)``."""
    out = []
    if abs(c2) < 1e-15:
        if abs(c1) > 1e-15:
            out.append(-c0 / c1)
    else:
        disc = c1 * c1 - 4 * c2 * c0
        if disc >= -1e-12:
            disc = max(disc, 0.0)
            sq = math.sqrt(disc)
            q = -0.5 * (c1 + math.copysign(sq, c1)) if c1 != 0 else -0.5 * sq
            cands = []
            if q != 0:
                cands += [q / c2, c0 / q]
            else:
                cands += [0.0]
            out += cands
    return [r for r in out if lo + tol < r < hi - tol]


def trace_states(ts0: TrafficSnapshot, w: TimedWord, atlas: PropositionAtlas, horizon: float,
                 geom: Mapping[str, CarGeometry], bounds: DynamicBounds | None = None, *,
                 view: View | None = None, tol: float = TOL) -> TimedStateSequence:
    """Maximal constant-truth phases of the atlas along ``run_word(ts0, w, horizon)``.

    ``bounds`` is accepted for interface symmetry; the model itself never clamps.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    atlas.check_ground(ts0.cars)
    evo = run_word(ts0, w, horizon)
    consts = set()
    for _, f in atlas:
        consts |= length_constants(f)
    offsets = sorted({0.0} | consts | {-k for k in consts})

    samples = list(evo.samples)
    crit: list[float] = []
    for (ts, t0), (_, t1) in zip(samples, samples[1:]):
        crit.append(t0)
        dur = t1 - t0
        ends = []
        for c in ts.cars:
            for off in (0.0, geom[c].size, geom[c].size + geom[c].braking_distance):
                ends.append((ts.pos[c] + off, ts.spd[c], 0.5 * ts.acc[c]))
        local = []
        for e, f in combinations(ends, 2):
            for k in offsets:
                local += _roots(f[2] - e[2], f[1] - e[1], f[0] - e[0] - k, 0.0, dur, 1e-12)
        crit += [t0 + r for r in sorted(local)]
    crit.append(samples[-1][1])
    crit.sort()
    pts: list[float] = []
    for t in crit:
        if not pts or t - pts[-1] > 1e-9:
            pts.append(t)
        elif t in {s for _, s in samples}:
            pts[-1] = t
    sample_times = [s for _, s in samples]
    for s in sample_times:
        for i, p in enumerate(pts):
            if abs(p - s) <= 1e-9:
                pts[i] = s

    def label(t: float) -> frozenset:
        ts = evo.at(t)
        v = view or default_view(ts, geom)
        return frozenset(pid for pid, f in atlas if evaluate(ts, f, geom, view=v, tol=tol))

    phases = []
    for i, p in enumerate(pts):
        phases.append(Phase(label(p), Interval.point(p)))
        if i + 1 < len(pts):
            q = pts[i + 1]
            phases.append(Phase(label((p + q) / 2), Interval.open(p, q)))
    return TimedStateSequence(tuple(phases), frozenset(atlas.ids)).fused()
