"""Region automata over state-clock automata, bad-state marking and tracking.

A region state is ``(slot, location, region)`` where ``slot`` is ``"P"`` for
a single time point and ``"O"`` for the open interval up to the next event.
Each clock value in a region is one of

* ``None``             undefined (no attained occurrence),
* ``("eq", k)``        exactly ``k``,
* ``("in", k, rank)``  inside ``(k, k+1)``; ``rank`` orders fractional phases,
* ``("gt",)``          beyond the clock's largest constant.

History clocks count up, prophecy clocks count down; both are ordered by
the phase ``frac(now - anchor)`` so that the top-ranked group is always the
next one to reach an integer.  A tick clock with bound 1 is added to every
automaton: it is integral exactly at integer times, which both forces time
to diverge (it must hit 1 infinitely often) and lets a sequence with integer
breakpoints be tracked unit by unit.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import networkx as nx

from ..sequence import Interval, Phase, TimedStateSequence
from .automaton import ClockLiteral, ScAutomaton

GT = ("gt",)
TICK = "tick"


class RegionCapError(RuntimeError):
    """An enumeration would exceed its configured cap."""


@dataclass(frozen=True)
class ClockSpec:
    name: str
    kind: str  # "history", "prophecy" or "tick"
    key: str
    cmax: int


def _value_str(v) -> str:
    if v is None:
        return "_"
    if v[0] == "eq":
        return f"={v[1]}"
    if v[0] == "in":
        return f"({v[1]},{v[1] + 1})#{v[2]}"
    return ">"


def _holds(lit: ClockLiteral, v) -> bool:
    if v is None:
        ok = False
    elif v[0] == "eq":
        ok = _cmp(v[1], lit.op, lit.c)
    elif v[0] == "in":
        k = v[1]
        ok = {"<": k + 1 <= lit.c, "<=": k + 1 <= lit.c, "=": False,
              ">": k >= lit.c, ">=": k >= lit.c}[lit.op]
    else:
        ok = lit.op in (">", ">=")
    return ok == lit.positive


def _cmp(a, op, b) -> bool:
    return {"<": a < b, "<=": a <= b, "=": a == b, ">": a > b, ">=": a >= b}[op]


def _normalize(reg: list) -> tuple:
    ranks = sorted({v[2] for v in reg if v is not None and v[0] == "in"})
    remap = {r: i for i, r in enumerate(ranks)}
    return tuple(("in", v[1], remap[v[2]]) if v is not None and v[0] == "in" else v for v in reg)


@dataclass(frozen=True)
class RegionSequence:
    """A run fragment: region-automaton states plus what is needed to concretize it."""

    states: tuple
    slots: tuple  # per state: ("P" | "O", visible label)
    start: Fraction = Fraction(0)
    scale: int = 1
    alphabet: frozenset = frozenset()

    def __len__(self):
        return len(self.states)

    @property
    def labels(self) -> tuple:
        return tuple(lab for _, lab in self.slots)


@dataclass(frozen=True, eq=False)
class RegionAutomaton:
    props: frozenset
    clocks: tuple
    states: tuple  # (slot, loc_id, region)
    succ: tuple  # tuple of tuples of state indices
    initial: frozenset
    buchi: tuple  # tuple of frozensets of state indices
    labels: tuple  # visible label per state
    tick_hit: tuple  # per state: P slot at an integer time
    bad: frozenset = frozenset()
    scale: int = 1
    index: dict = field(default=None, repr=False)

    def __len__(self):
        return len(self.states)

    def state(self, i: int):
        return self.states[i]

    def describe(self, i: int) -> str:
        slot, loc, reg = self.states[i]
        clocks = " ".join(f"{c.name}{_value_str(v)}" for c, v in zip(self.clocks, reg))
        return f"{slot} {loc} [{clocks}]"

    def is_empty(self) -> bool:
        """True iff no accepting run starts in an initial state."""
        return all(i in self.bad for i in self.initial)

    def dump(self) -> str:
        lines = []
        for i in range(len(self.states)):
            flags = (" init" if i in self.initial else "") + (" bad" if i in self.bad else "")
            lab = "{" + ",".join(sorted(self.labels[i])) + "}"
            lines.append(f"state {i} {self.describe(i)} {lab}{flags}")
        for i, ss in enumerate(self.succ):
            lines += [f"edge {i} -> {j}" for j in ss]
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------

class _Builder:
    def __init__(self, a: ScAutomaton):
        self.a = a
        bounds = a.clock_bounds()
        self.clocks = tuple(ClockSpec(n, "history" if n[0] == "x" else "prophecy", n[2:], c)
                            for n, c in bounds.items()) + (ClockSpec(TICK, "tick", "", 1),)
        self.cidx = {c.name: i for i, c in enumerate(self.clocks)}
        self.locs = a.by_id
        self.out = {l: [] for l in self.locs}
        for x, y in a.edges:
            self.out[x].append(y)
        for l in self.locs:
            self.out[l].sort()

    # -- clock bookkeeping ------------------------------------------------

    def fresh(self, reg: list, idx: list[int]) -> list[tuple]:
        """All fresh guesses for the prophecy clocks ``idx`` at a point slot."""
        results = [list(reg)]
        for i in idx:
            c = self.clocks[i]
            nxt = []
            for base in results:
                ranks = sorted({v[2] for v in base if v is not None and v[0] == "in"})
                opts = [None, GT] + [("eq", k) for k in range(1, c.cmax + 1)]
                spots = ranks + [r - 0.5 for r in ranks] + [len(ranks) - 0.5]
                for k in range(c.cmax):
                    opts += [("in", k, s) for s in spots]
                for o in opts:
                    r2 = list(base)
                    r2[i] = o
                    nxt.append(list(_normalize(r2)))
            results = nxt
        return [tuple(r) for r in results]

    def p_to_o(self, reg: tuple, lab_p: frozenset, lab_o: frozenset):
        out = list(reg)
        low = []
        for i, c in enumerate(self.clocks):
            v = reg[i]
            if c.kind == "tick":
                if v[0] == "eq":
                    out[i] = ("in", 0, None)
                    low.append(i)
            elif c.kind == "history":
                if c.key in lab_o:
                    out[i] = None
                elif c.key in lab_p:
                    out[i] = ("in", 0, None)
                    low.append(i)
                elif v is not None and v[0] == "eq":
                    if v[1] >= c.cmax:
                        out[i] = GT
                    else:
                        out[i] = ("in", v[1], None)
                        low.append(i)
            else:
                if c.key in lab_o:
                    if v is not None:
                        return None
                elif v is not None and v[0] == "eq":
                    out[i] = ("in", v[1] - 1, None)
                    low.append(i)
        if low:
            for i, v in enumerate(out):
                if v is not None and v[0] == "in":
                    out[i] = ("in", v[1], -1 if i in low else v[2])
        return _normalize(out)

    def o_events(self, reg: tuple) -> list[tuple]:
        """Clock values at the next point: a plain point or the top group
        reaching an integer, each combined with any subset of far prophecies
        dropping to their bound."""
        bases = [tuple(reg)]
        ranks = [v[2] for v in reg if v is not None and v[0] == "in"]
        if ranks:
            top = max(ranks)
            hit = list(reg)
            for i, v in enumerate(reg):
                if v is not None and v[0] == "in" and v[2] == top:
                    k = v[1] if self.clocks[i].kind == "prophecy" else v[1] + 1
                    hit[i] = ("eq", k)
            bases.append(_normalize(hit))
        far = [i for i, c in enumerate(self.clocks) if c.kind == "prophecy" and reg[i] == GT]
        out = []
        for b in bases:
            for n in range(len(far) + 1):
                for sub in itertools.combinations(far, n):
                    r = list(b)
                    for i in sub:
                        r[i] = ("eq", self.clocks[i].cmax)
                    out.append(tuple(r))
        return out

    def enter_p(self, pre: tuple, lab_o: frozenset, lab_p: frozenset) -> list[tuple]:
        out = list(pre)
        fresh = []
        for i, c in enumerate(self.clocks):
            v = pre[i]
            if c.kind == "history":
                if c.key in lab_o:
                    out[i] = None
            elif c.kind == "prophecy":
                a_o, a_p = c.key in lab_o, c.key in lab_p
                if v == ("eq", 0):
                    if not a_p:
                        return []
                    fresh.append(i)
                elif v is None:
                    if a_o:
                        fresh.append(i)
                    elif a_p:
                        return []
                elif a_p:
                    return []
        return self.fresh(out, fresh) if fresh else [tuple(out)]

    def delta_ok(self, loc, reg) -> bool:
        return all(_holds(lit, reg[self.cidx[lit.clock]]) for lit in loc.delta)

    def next_locations(self, slot: str, loc_id: str) -> list[str]:
        want = "O" if slot == "P" else "P"
        out = [b for b in self.out[loc_id] if self.locs[b].kind in (None, want)]
        if self.locs[loc_id].kind is None and loc_id not in out:
            out.append(loc_id)
        return out

    def initial(self) -> list[tuple]:
        base = []
        for c in self.clocks:
            base.append(("eq", 0) if c.kind == "tick" else None)
        proph = [i for i, c in enumerate(self.clocks) if c.kind == "prophecy"]
        regs = self.fresh(base, proph) if proph else [tuple(base)]
        out = []
        for lid in sorted(self.a.initial):
            loc = self.locs[lid]
            if loc.kind not in (None, "P"):
                continue
            out += [("P", lid, r) for r in regs if self.delta_ok(loc, r)]
        return out

    def successors(self, state) -> list[tuple]:
        slot, lid, reg = state
        lab = self.locs[lid].label
        out = []
        targets = self.next_locations(slot, lid)
        if slot == "P":
            cache = {}
            for t in targets:
                loc = self.locs[t]
                sig = loc.label
                if sig not in cache:
                    cache[sig] = self.p_to_o(reg, lab, sig)
                r2 = cache[sig]
                if r2 is not None and self.delta_ok(loc, r2):
                    out.append(("O", t, r2))
        else:
            pres = self.o_events(reg)
            cache = {}
            for t in targets:
                loc = self.locs[t]
                sig = loc.label
                if sig not in cache:
                    regs = []
                    for pre in pres:
                        regs += self.enter_p(pre, lab, sig)
                    cache[sig] = list(dict.fromkeys(regs))
                out += [("P", t, r2) for r2 in cache[sig] if self.delta_ok(loc, r2)]
        return out


def regionize(a: ScAutomaton, *, scale: int = 1, max_states: int = 2_000_000) -> RegionAutomaton:
    """Reachable part of the region automaton of ``a`` (no bad labels yet)."""
    b = _Builder(a)
    tick = b.cidx[TICK]
    index: dict = {}
    states: list = []
    succ: list = []
    queue = deque()

    def intern(s):
        i = index.get(s)
        if i is None:
            i = index[s] = len(states)
            if i >= max_states:
                raise RegionCapError(f"region automaton exceeds {max_states} states")
            states.append(s)
            succ.append(None)
            queue.append(i)
        return i

    init = frozenset(intern(s) for s in b.initial())
    while queue:
        i = queue.popleft()
        succ[i] = tuple(sorted({intern(s) for s in b.successors(states[i])}))

    buchi = [frozenset(i for i, s in enumerate(states) if s[1] in acc) for acc in a.accept]
    for ci, c in enumerate(b.clocks):
        if c.kind == "prophecy":
            buchi.append(frozenset(i for i, s in enumerate(states) if s[2][ci] != GT))
    buchi.append(frozenset(i for i, s in enumerate(states) if s[0] == "P" and s[2][tick] == ("eq", 1)))
    labels = tuple(b.locs[s[1]].label & a.props for s in states)
    tick_hit = tuple(s[0] == "P" and s[2][tick][0] == "eq" for s in states)
    return RegionAutomaton(a.props, b.clocks, tuple(states), tuple(succ), init, tuple(buchi),
                           labels, tick_hit, frozenset(), scale, index)


def _graph(r: RegionAutomaton) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(range(len(r.states)))
    g.add_edges_from((i, j) for i, ss in enumerate(r.succ) for j in ss)
    return g


def good_components(r: RegionAutomaton) -> list[set]:
    g = _graph(r)
    good = []
    for comp in nx.strongly_connected_components(g):
        if len(comp) == 1:
            (v,) = comp
            if v not in r.succ[v]:
                continue
        if all(comp & f for f in r.buchi):
            good.append(comp)
    return good


def mark_bad(r: RegionAutomaton) -> RegionAutomaton:
    """Label every state from which no accepting lasso is reachable."""
    pred: list[list[int]] = [[] for _ in r.states]
    for i, ss in enumerate(r.succ):
        for j in ss:
            pred[j].append(i)
    alive = set().union(*good_components(r)) if r.states else set()
    queue = deque(alive)
    while queue:
        j = queue.popleft()
        for i in pred[j]:
            if i not in alive:
                alive.add(i)
                queue.append(i)
    bad = frozenset(range(len(r.states))) - alive
    return RegionAutomaton(r.props, r.clocks, r.states, r.succ, r.initial, r.buchi, r.labels,
                           r.tick_hit, bad, r.scale, r.index)


def accepting_lasso(r: RegionAutomaton, start: int):
    """``(stem, cycle)`` of state indices witnessing acceptance from ``start``, or None."""
    comps = good_components(r)
    member = {v: k for k, c in enumerate(comps) for v in c}
    parent = {start: None}
    queue = deque([start])
    hit = None
    while queue:
        i = queue.popleft()
        if i in member:
            hit = i
            break
        for j in r.succ[i]:
            if j not in parent:
                parent[j] = i
                queue.append(j)
    if hit is None:
        return None
    stem = []
    v = hit
    while v is not None:
        stem.append(v)
        v = parent[v]
    stem.reverse()
    comp = comps[member[hit]]

    def path(src, goal_set):
        par = {src: None}
        q = deque([src])
        while q:
            i = q.popleft()
            for j in r.succ[i]:
                if j in comp and j not in par:
                    par[j] = i
                    if j in goal_set:
                        out = [j]
                        while par[out[-1]] is not None:
                            out.append(par[out[-1]])
                        return out[::-1][1:]
                    q.append(j)
        return None

    cycle = []
    cur = hit
    for f in r.buchi:
        seg = path(cur, f & comp)
        cycle += seg
        cur = seg[-1]
    seg = path(cur, {hit})
    cycle += seg
    return stem, cycle


# --------------------------------------------------------------------------
# tracking timed state sequences with integer breakpoints
# --------------------------------------------------------------------------

def _unit_plan(m: TimedStateSequence):
    """Split ``m`` into unit steps ``(o_label, p_label)``; ``p_label`` None = unconstrained."""
    if not m.phases:
        return None, [], True
    first = m.phases[0].interval
    if first.lo != 0 or not first.lo_closed:
        raise ValueError("sequence must start with a closed border at time 0")
    for x in m.breakpoints():
        if Fraction(x).denominator != 1:
            raise ValueError(f"breakpoint {x} is not an integer in the automaton's time unit")
    p0 = m.state_at(0)
    steps = []
    end = int(m.end)
    for n in range(end):
        lab_o = m.state_at(Fraction(2 * n + 1, 2))
        if n + 1 < end or m.end_closed:
            lab_p = m.state_at(n + 1)
        else:
            lab_p = None
        steps.append((lab_o, lab_p))
    return p0, steps, m.end_closed


class Tracker:
    """Subset construction over a region automaton, one time unit at a time."""

    def __init__(self, r: RegionAutomaton, alphabet: Iterable[str] | None = None):
        self.r = r
        self.observed = r.props if alphabet is None else r.props & frozenset(alphabet)

    def _match(self, i: int, lab) -> bool:
        return lab is None or (self.r.labels[i] & self.observed) == (frozenset(lab) & self.observed)

    def start(self, lab) -> frozenset:
        return frozenset(i for i in self.r.initial if self._match(i, lab))

    def step(self, cur: frozenset, lab_o, lab_p) -> frozenset:
        r = self.r
        seen_o = set()
        queue = deque()
        for i in cur:
            for j in r.succ[i]:
                if j not in seen_o and self._match(j, lab_o):
                    seen_o.add(j)
                    queue.append(j)
        seen_p = set()
        out = set()
        while queue:
            o = queue.popleft()
            for p in r.succ[o]:
                if r.tick_hit[p]:
                    if self._match(p, lab_p):
                        out.add(p)
                elif p not in seen_p and self._match(p, lab_o):
                    seen_p.add(p)
                    for o2 in r.succ[p]:
                        if o2 not in seen_o and self._match(o2, lab_o):
                            seen_o.add(o2)
                            queue.append(o2)
        return frozenset(out)


def track(r: RegionAutomaton, m: TimedStateSequence) -> frozenset:
    """Indices of states reachable along ``m`` (breakpoints must be integers).

    Propositions of ``r`` outside ``m.alphabet`` are left unconstrained.  The
    result holds point-slot states at ``m.end``; when ``m`` ends open, the
    state at its end point is unconstrained.  An empty ``m`` yields the
    initial states.
    """
    tr = Tracker(r, m.alphabet)
    if not m.phases:
        return r.initial
    p0, steps, _ = _unit_plan(m)
    cur = tr.start(p0)
    for lab_o, lab_p in steps:
        if not cur:
            break
        cur = tr.step(cur, lab_o, lab_p)
    return cur


# --------------------------------------------------------------------------
# candidate region sequences
# --------------------------------------------------------------------------

def candidate_sequences(r: RegionAutomaton, current: Iterable[int], horizon, *, start=0,
                        max_changes: int = 3, cap: int = 1_000_000) -> set:
    """Grid-aligned, bad-free region sequences covering ``horizon`` time units.

    Each sequence alternates point states at integer times and one open
    state per unit.  Sequences are deduplicated by their visible labels and
    carry at most ``max_changes`` label changes.  Raises RegionCapError when
    more than ``cap`` distinct sequences exist.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    units = math.ceil(horizon)
    bad = r.bad
    labels = r.labels

    def moves(i):
        for o in r.succ[i]:
            if o in bad:
                continue
            for p in r.succ[o]:
                if r.tick_hit[p] and p not in bad:
                    yield o, p

    feasible_memo: dict = {}

    def feasible(i, left, changes):
        key = (i, left, changes)
        if key in feasible_memo:
            return feasible_memo[key]
        ok = left == 0
        if not ok:
            for o, p in moves(i):
                c = changes - (labels[o] != labels[i]) - (labels[p] != labels[o])
                if c >= 0 and feasible(p, left - 1, c):
                    ok = True
                    break
        feasible_memo[key] = ok
        return ok

    found: dict = {}

    def walk(path, left, changes):
        i = path[-1]
        if left == 0:
            proj = tuple(labels[s] for s in path)
            if proj not in found:
                if len(found) >= cap:
                    raise RegionCapError(f"more than {cap} candidate sequences")
                found[proj] = tuple(path)
            return
        seen = set()
        for o, p in moves(i):
            c = changes - (labels[o] != labels[i]) - (labels[p] != labels[o])
            if c < 0 or (labels[o], p) in seen or not feasible(p, left - 1, c):
                continue
            seen.add((labels[o], p))
            walk(path + [o, p], left - 1, c)

    for s in sorted(current):
        if s in bad or r.states[s][0] != "P":
            continue
        if feasible(s, units, max_changes):
            walk([s], units, max_changes)

    start = Fraction(start)
    return {RegionSequence(states, tuple((r.states[i][0], labels[i]) for i in states), start, r.scale, r.props)
            for states in found.values()}


def to_state_sequence(pi: RegionSequence) -> TimedStateSequence:
    """Concrete sequence realizing a grid-aligned region sequence."""
    phases = []
    t = Fraction(pi.start) * pi.scale
    for k, (slot, lab) in enumerate(pi.slots):
        if slot != ("P" if k % 2 == 0 else "O"):
            raise ValueError("region sequence must alternate point and open slots, starting with a point")
        if slot == "P":
            phases.append(Phase(frozenset(lab), Interval.point(t / pi.scale)))
        else:
            phases.append(Phase(frozenset(lab), Interval.open(t / pi.scale, (t + 1) / pi.scale)))
            t += 1
    return TimedStateSequence(tuple(phases), pi.alphabet).fused()
