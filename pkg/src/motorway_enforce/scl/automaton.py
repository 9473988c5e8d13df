"""State-clock automata: tableau compilation of SCL and a small text format.

Runs of a compiled automaton alternate point slots and open slots.  Every
location fixes the truth of all temporal subformulae, so the tableau edge
rules only ever look at two neighbouring slots.  Clock obligations of
``next``/``last`` are carried by clock literals on locations; which clock
they talk about is named ``y_<key>`` (time to the next occurrence of
``key``) or ``x_<key>`` (time since the last one).  A key is a proposition
or an auxiliary name standing for a compound argument, and a location's
label lists the keys true there.

Hand-written automata may leave a location's slot kind open; such a
location can occupy any run of consecutive slots.
"""

from __future__ import annotations

import itertools
import re
import shlex
from dataclasses import dataclass, field

from . import formula as F

OPS = ("<=", ">=", "<", ">", "=")


@dataclass(frozen=True)
class ClockLiteral:
    """``clock op c`` holds when the clock is defined and compares; negated otherwise."""

    clock: str
    op: str
    c: int
    positive: bool = True

    def __post_init__(self):
        if not re.fullmatch(r"[xy]_\w+", self.clock):
            raise ValueError(f"clock names look like x_<key> or y_<key>, got {self.clock!r}")
        if self.op not in OPS:
            raise ValueError(f"bad comparison {self.op!r}")
        if not isinstance(self.c, int) or self.c < 0:
            raise ValueError("clock constants must be non-negative integers")

    @property
    def kind(self) -> str:
        return "history" if self.clock[0] == "x" else "prophecy"

    @property
    def key(self) -> str:
        return self.clock[2:]

    def __str__(self):
        return f"{'' if self.positive else '!'}{self.clock}{self.op}{self.c}"


@dataclass(frozen=True)
class Location:
    id: str
    label: frozenset = frozenset()
    delta: tuple = ()
    kind: str | None = None  # "P", "O", or None for either

    def __post_init__(self):
        object.__setattr__(self, "label", frozenset(self.label))
        object.__setattr__(self, "delta", tuple(self.delta))
        if self.kind not in (None, "P", "O"):
            raise ValueError(f"location kind must be P, O or None, got {self.kind!r}")


@dataclass(frozen=True)
class ScAutomaton:
    props: frozenset
    locations: tuple
    initial: frozenset
    edges: frozenset
    accept: tuple = ()
    by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "props", frozenset(self.props))
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "initial", frozenset(self.initial))
        object.__setattr__(self, "edges", frozenset(self.edges))
        object.__setattr__(self, "accept", tuple(frozenset(a) for a in self.accept))
        by_id = {l.id: l for l in self.locations}
        if len(by_id) != len(self.locations):
            raise ValueError("duplicate location ids")
        object.__setattr__(self, "by_id", by_id)
        for a, b in self.edges:
            if a not in by_id or b not in by_id:
                raise ValueError(f"edge {a} -> {b} mentions an unknown location")
        for ids in (self.initial, *self.accept):
            missing = set(ids) - set(by_id)
            if missing:
                raise ValueError(f"unknown locations {sorted(missing)}")

    def successors(self, loc_id: str) -> list[str]:
        return sorted(b for a, b in self.edges if a == loc_id)

    def clock_bounds(self) -> dict[str, int]:
        """Clock name -> largest constant it is compared with (at least 1)."""
        out: dict[str, int] = {}
        for l in self.locations:
            for lit in l.delta:
                out[lit.clock] = max(out.get(lit.clock, 1), lit.c)
        return dict(sorted(out.items()))

    def to_text(self) -> str:
        lines = [f"props {' '.join(sorted(self.props))}".rstrip()]
        for l in self.locations:
            parts = [f"loc {l.id}", "props={" + ",".join(sorted(l.label)) + "}"]
            if l.delta:
                parts.append('delta="' + " & ".join(str(d) for d in l.delta) + '"')
            if l.kind:
                parts.append(f"kind={l.kind}")
            if l.id in self.initial:
                parts.append("init")
            acc = [str(i) for i, s in enumerate(self.accept) if l.id in s]
            if acc:
                parts.append("accept=" + ",".join(acc))
            lines.append(" ".join(parts))
        lines += [f"edge {a} -> {b}" for a, b in sorted(self.edges)]
        return "\n".join(lines) + "\n"


_LIT = re.compile(r"^(!?)\s*([xy]_\w+)\s*(<=|>=|<|>|=)\s*(\d+)$")


def parse_literal(text: str) -> ClockLiteral:
    m = _LIT.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse clock literal {text!r}")
    neg, clock, op, c = m.groups()
    return ClockLiteral(clock, op, int(c), not neg)


def parse_automaton(text: str) -> ScAutomaton:
    """Read the hand-authored format.

    ::

        props p q
        loc a props={p} delta="y_p<=2 & !x_q=1" init accept=0
        loc b props={}
        edge a -> b
    """
    props: set = set()
    locs, init, edges = [], set(), set()
    accept: dict[int, set] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            words = shlex.split(line)
        except ValueError as exc:
            raise ValueError(f"line {n}: {exc}") from exc
        head = words[0]
        if head == "props":
            props.update(words[1:])
        elif head == "edge":
            m = re.fullmatch(r"edge\s+(\S+)\s*->\s*(\S+)", line)
            if not m:
                raise ValueError(f"line {n}: expected 'edge <id> -> <id>'")
            edges.add(m.groups())
        elif head == "loc":
            if len(words) < 2:
                raise ValueError(f"line {n}: location without id")
            lid, label, delta, kind = words[1], frozenset(), (), None
            for w in words[2:]:
                if w.startswith("props="):
                    label = frozenset(x for x in w[6:].strip("{}").split(",") if x.strip())
                elif w.startswith("delta="):
                    body = w[6:]
                    delta = tuple(parse_literal(x) for x in body.split("&") if x.strip())
                elif w.startswith("kind="):
                    kind = w[5:]
                elif w == "init":
                    init.add(lid)
                elif w.startswith("accept="):
                    for idx in w[7:].split(","):
                        accept.setdefault(int(idx), set()).add(lid)
                else:
                    raise ValueError(f"line {n}: unknown attribute {w!r}")
            locs.append(Location(lid, label, delta, kind))
        else:
            raise ValueError(f"line {n}: unknown directive {head!r}")
    for l in locs:
        props |= {k for k in l.label if not k.startswith("_")}
    acc = tuple(frozenset(accept[i]) for i in sorted(accept))
    return ScAutomaton(frozenset(props), tuple(locs), frozenset(init), frozenset(edges), acc)


# --------------------------------------------------------------------------
# tableau compilation
# --------------------------------------------------------------------------

_FREE = (F.Prop, F.Until, F.Since, F.Next, F.Last)


def compile(psi: F.SclFormula) -> ScAutomaton:
    """Tableau automaton whose runs are exactly the slot-wise models of ``psi``."""
    subs = F.subformulas(psi)
    index = {g: i for i, g in enumerate(subs)}
    free = [g for g in subs if isinstance(g, _FREE)]
    timed = [g for g in subs if isinstance(g, (F.Next, F.Last))]

    def key(g):
        return g.name if isinstance(g, F.Prop) else f"_{index[g]}"

    arg_keys = {key(g.arg): g.arg for g in timed}

    def valuate(bits):
        val = dict(zip(free, bits))
        for g in subs:
            if g in val:
                continue
            if isinstance(g, F.TrueS):
                val[g] = True
            elif isinstance(g, F.Not):
                val[g] = not val[g.arg]
            elif isinstance(g, F.Or):
                val[g] = val[g.left] or val[g.right]
            elif isinstance(g, F.And):
                val[g] = val[g.left] and val[g.right]
        return val

    def locally_ok(val):
        for g in subs:
            if isinstance(g, (F.Until, F.Since)):
                if val[g.right] and not val[g]:
                    return False
                if val[g] and not val[g.right] and not val[g.left]:
                    return False
        return True

    locs: list[Location] = []
    vals: dict[str, dict] = {}
    for kind in ("P", "O"):
        for n, bits in enumerate(itertools.product((False, True), repeat=len(free))):
            val = valuate(bits)
            if not locally_ok(val):
                continue
            label = {g.name for g in subs if isinstance(g, F.Prop) and val[g]}
            label |= {k for k, a in arg_keys.items() if val[a]}
            delta = []
            for g in timed:
                clock = ("y_" if isinstance(g, F.Next) else "x_") + key(g.arg)
                delta.append(ClockLiteral(clock, g.op, g.c, val[g]))
            lid = f"{kind}{n}"
            locs.append(Location(lid, frozenset(label), tuple(delta), kind))
            vals[lid] = val

    untils = [g for g in subs if isinstance(g, F.Until)]
    sinces = [g for g in subs if isinstance(g, F.Since)]

    def p_to_o(p, o):
        for g in untils:
            if p[g] != (p[g.right] or (p[g.left] and o[g.left] and o[g])):
                return False
        for g in sinces:
            if o[g] != (o[g.right] or (o[g.left] and p[g])):
                return False
        return True

    def o_to_p(o, p):
        for g in untils:
            if o[g] != (o[g.right] or (o[g.left] and p[g])):
                return False
        for g in sinces:
            if p[g] != (p[g.right] or (p[g.left] and o[g.left] and o[g])):
                return False
        return True

    edges = set()
    ps = [l for l in locs if l.kind == "P"]
    os_ = [l for l in locs if l.kind == "O"]
    for a in ps:
        for b in os_:
            if p_to_o(vals[a.id], vals[b.id]):
                edges.add((a.id, b.id))
            if o_to_p(vals[b.id], vals[a.id]):
                edges.add((b.id, a.id))

    initial = frozenset(l.id for l in ps if vals[l.id][psi]
                        and all(vals[l.id][g] == vals[l.id][g.right] for g in sinces))
    accept = tuple(frozenset(l.id for l in locs if not vals[l.id][g] or vals[l.id][g.right]) for g in untils)
    return ScAutomaton(F.props(psi), tuple(locs), initial, frozenset(edges), accept)
