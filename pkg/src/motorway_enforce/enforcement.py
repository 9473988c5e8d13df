"""Distributed enforcement: car controllers, the road-side unit and episodes.

Each controlled car tracks its specification on the region automaton and
announces the bad-free state sequences it could still live with.  The RSU
combines the announcements of all cars, searches an acceleration schedule
that realizes one combination and hands every car its share of the word.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

from .dyn import DynSpec, PiecewisePlan, check_plan, decide_acceleration, kinematic_infeasibility
from .dyn import Phase as DynPhase
from .mlsls import (Cl, Formula, Not, PropositionAtlas, Somewhere, default_view, evaluate, gap_constraint_of,
                    trace_states)
from .scl import RegionCapError, SclFormula, candidate_sequences, eval_finite, to_state_sequence
from .scl.finite import automaton_for, rescale, time_scale
from .scl.regions import Tracker, _unit_plan
from .sequence import Interval, Phase, TimedStateSequence
from .traffic import (CarGeometry, Claim, DynamicBounds, RoadConfig, TimedWord, TrafficSnapshot,
                      WithdrawClaim, gap, run_word)


class ProtocolError(RuntimeError):
    """An event reached a state machine with no matching edge."""


class InconsistentCombination(ValueError):
    """Two sequences assert a proposition and its negation at the same time."""


class SpanMismatch(ValueError):
    """Sequences to be combined do not cover the same time span."""


# --------------------------------------------------------------------------
# messages
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Com:
    car: str
    action: object
    t: float


@dataclass(frozen=True)
class Send:
    car: str
    plans: frozenset


@dataclass(frozen=True)
class Receive:
    car: str
    omega: TimedWord

    def __post_init__(self):
        for a, _ in self.omega:
            if a.car != self.car:
                raise ValueError(f"word for {self.car} contains action {a} of another car")


@dataclass(frozen=True)
class Announce:
    """Deadline forcing a controller out of q0."""

    t: float


@dataclass(frozen=True)
class Tick:
    """Time has advanced to ``t``."""

    t: float


Message = Union[Com, Send, Receive]


# --------------------------------------------------------------------------
# combining sequences
# --------------------------------------------------------------------------

def _literal(atlas: Optional[PropositionAtlas], pid: str):
    """Canonical (formula key, polarity) of a proposition id."""
    if atlas is None or pid not in atlas.ids:
        return pid, True
    f = atlas[pid]
    sign = True
    while isinstance(f, Not):
        f, sign = f.arg, not sign
    return f, sign


def _contradiction(state: frozenset, negated: frozenset, atlas) -> Optional[str]:
    pos: dict = {}
    for pid in sorted(state):
        key, sign = _literal(atlas, pid)
        pos.setdefault(key, {})[sign] = pid
    for pid in sorted(negated):
        key, sign = _literal(atlas, pid)
        pos.setdefault(key, {})[not sign] = pid
    for key, signs in pos.items():
        if len(signs) == 2:
            return f"{signs[True]} vs {signs[False]}"
    return None


def combine(m1: TimedStateSequence, m2: TimedStateSequence,
            atlas: Optional[PropositionAtlas] = None) -> TimedStateSequence:
    """Slot-wise union of two sequences over the same span.

    A proposition in a sequence's alphabet but absent from a state is read as
    negated.  Raises InconsistentCombination when some slot would hold a
    literal together with its negation (ids with the same atlas formula, or
    its negation, count as the same literal).
    """
    if not m1.phases or not m2.phases:
        if m1.phases or m2.phases:
            raise SpanMismatch("cannot combine an empty sequence with a non-empty one")
        return TimedStateSequence((), m1.alphabet | m2.alphabet)
    if (m1.start, m1.end, m1.phases[0].interval.lo_closed, m1.end_closed) != \
            (m2.start, m2.end, m2.phases[0].interval.lo_closed, m2.end_closed):
        raise SpanMismatch(f"spans differ: {m1.phases[0].interval}..{m1.phases[-1].interval} vs "
                           f"{m2.phases[0].interval}..{m2.phases[-1].interval}")
    pts = sorted(set(m1.breakpoints()) | set(m2.breakpoints()))
    slots = []
    for i, p in enumerate(pts):
        if i > 0:
            slots.append(Interval.open(pts[i - 1], p))
        slots.append(Interval.point(p))
    if not m1.phases[0].interval.lo_closed:
        slots = slots[1:]
    if not m1.end_closed:
        slots = slots[:-1]
    alphabet = m1.alphabet | m2.alphabet
    phases = []
    for iv in slots:
        t = iv.midpoint()
        s1, s2 = m1.state_at(t), m2.state_at(t)
        state = s1 | s2
        negated = (m1.alphabet - s1) | (m2.alphabet - s2)
        why = _contradiction(state, negated, atlas)
        if why:
            raise InconsistentCombination(f"contradiction on {iv}: {why}")
        phases.append(Phase(state, iv))
    return TimedStateSequence(tuple(phases), alphabet).fused()


def combine_all(plans: Mapping[str, Iterable[TimedStateSequence]], atlas: Optional[PropositionAtlas] = None,
                *, cap: int = 100_000) -> list[TimedStateSequence]:
    """One sequence per car, folded with ``combine``; inconsistent choices are dropped.

    The result is deduplicated and sorted by (number of phases, text).
    """
    cars = sorted(plans)
    sets = []
    for c in cars:
        s = sorted(set(plans[c]), key=_seq_key)
        if not s:
            raise ValueError(f"car {c} announced no sequence")
        sets.append(s)
    if math.prod(len(s) for s in sets) > cap:
        raise RegionCapError(f"more than {cap} combinations to check")
    out = {}
    for choice in itertools.product(*sets):
        try:
            m = choice[0]
            for other in choice[1:]:
                m = combine(m, other, atlas)
        except InconsistentCombination:
            continue
        out[m.to_text()] = m
    return sorted(out.values(), key=_seq_key)


def _seq_key(m: TimedStateSequence):
    return (len(m.phases), m.to_text())


# --------------------------------------------------------------------------
# from state sequences to DYN specs
# --------------------------------------------------------------------------

def _claim_car(f: Formula) -> Optional[str]:
    if isinstance(f, Somewhere):
        f = f.body
    return f.car if isinstance(f, Cl) else None


def _prop_kind(atlas: PropositionAtlas, pid: str):
    """("gap", constraint, sign) | ("claim", car, sign) | ("static", None, None)."""
    key, sign = _literal(atlas, pid)
    g = gap_constraint_of(key) if isinstance(key, Formula) else None
    if g is not None:
        return "gap", g, sign
    car = _claim_car(key) if isinstance(key, Formula) else None
    if car is not None:
        return "claim", car, sign
    return "static", None, None


def _phase_alternatives(state: frozenset, alphabet: frozenset, atlas: PropositionAtlas) -> list[tuple]:
    """Gap-constraint sets (one per pair) equivalent to the gap literals of a state."""
    per_lit = []
    for pid in sorted(alphabet):
        kind, g, sign = _prop_kind(atlas, pid)
        if kind != "gap":
            continue
        if (pid in state) == sign:
            per_lit.append([g])
        else:
            per_lit.append(g.complement())
    out = []
    for choice in itertools.product(*per_lit):
        merged: dict = {}
        for g in choice:
            merged[g.pair] = merged[g.pair].intersect(g) if g.pair in merged else g
        if any(g.is_empty() for g in merged.values()):
            continue
        out.append(tuple(merged[k] for k in sorted(merged)))
    return out


def _closure_meets(a: tuple, b: tuple) -> bool:
    """Continuity: on every shared pair the closed hulls must intersect."""
    bb = {g.pair: g for g in b}
    for g in a:
        h = bb.get(g.pair)
        if h is not None and (max(g.lo, h.lo) > min(g.hi, h.hi)):
            return False
    return True


def dyn_branches(m: TimedStateSequence, atlas: PropositionAtlas, *, limit: int = 256) -> list[tuple[DynPhase, ...]]:
    """Disjunctive DYN phase lists whose union is equivalent to the gap content of ``m``.

    Negated gap literals split into the complement's pieces; since gaps move
    continuously, adjacent phases whose constraint hulls are disjoint are
    pruned.  Times are shifted so that ``m`` starts at 0.
    """
    t0 = m.start
    alts = [_phase_alternatives(p.state, m.alphabet, atlas) for p in m.phases]
    ivs = [Interval(float(p.interval.lo - t0), float(p.interval.hi - t0), p.interval.lo_closed, p.interval.hi_closed)
           for p in m.phases]
    out: list = []

    def walk(i, acc):
        if len(out) >= limit:
            return
        if i == len(alts):
            out.append(tuple(DynPhase(th, iv) for th, iv in zip(acc, ivs)))
            return
        for th in alts[i]:
            if acc and not _closure_meets(acc[-1], th):
                continue
            walk(i + 1, acc + [th])

    walk(0, [])
    return out


def discrete_actions(m: TimedStateSequence, atlas: PropositionAtlas, ts0: TrafficSnapshot,
                     geom: Mapping[str, CarGeometry]) -> Optional[list]:
    """Claim/withdraw actions realizing the claim literals of ``m``; None if impossible.

    An action stamped ``t`` is visible from ``t`` on, so a value may only
    change on a phase that starts closed.  Static propositions must keep
    their value at time ``m.start`` for the whole sequence.
    """
    view = default_view(ts0, geom)
    acts = []
    claims = dict(ts0.clm)
    for pid in sorted(m.alphabet & set(atlas.ids)):
        kind, car, sign = _prop_kind(atlas, pid)
        if kind == "gap":
            continue
        if kind == "static":
            now = evaluate(ts0, atlas[pid], geom, view=view)
            if any((pid in p.state) != now for p in m.phases):
                return None
            continue
        vals = [(pid in p.state) == sign for p in m.phases]
        cur = bool(claims[car])
        for p, v in zip(m.phases, vals):
            if v == cur:
                continue
            if not p.interval.lo_closed:
                return None
            t = float(p.interval.lo)
            if v:
                (own,) = sorted(ts0.res[car])[:1]
                lane = own + 1 if own + 1 <= ts0.lane_count else own - 1
                if lane < 1:
                    return None
                acts.append((Claim(car, lane), t))
            else:
                acts.append((WithdrawClaim(car), t))
            cur = v
    return acts


# --------------------------------------------------------------------------
# scenarios
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CarSpec:
    atlas: PropositionAtlas
    formula: SclFormula


@dataclass(frozen=True)
class Scenario:
    road: RoadConfig
    snapshot: TrafficSnapshot
    geometry: Mapping[str, CarGeometry]
    bounds: DynamicBounds
    specs: Mapping[str, CarSpec]
    horizon: float
    seed: int = 0
    uncontrolled: frozenset = frozenset()
    external: TimedWord = TimedWord()
    announce_at: float = 0.0
    max_changes: int = 3
    max_sequences: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(self, "uncontrolled", frozenset(self.uncontrolled))
        cars = set(self.snapshot.cars)
        if set(self.road.car_ids) != cars:
            raise ValueError("road car ids and snapshot cars differ")
        if self.road.lane_count != self.snapshot.lane_count:
            raise ValueError("road and snapshot disagree on the lane count")
        missing = cars - set(self.specs) - self.uncontrolled
        if missing:
            raise ValueError(f"cars {sorted(missing)} have no spec and are not marked uncontrolled")
        if set(self.specs) & self.uncontrolled:
            raise ValueError("a car cannot both have a spec and be uncontrolled")
        if set(self.geometry) != cars:
            raise ValueError("geometry must be given for every car")
        if not 0 <= self.announce_at < self.horizon:
            raise ValueError("announcement must happen before the horizon")
        for a, t in self.external:
            if a.car not in self.uncontrolled or t > self.announce_at:
                raise ValueError(f"external action {a}@{t:g} must belong to an uncontrolled car and precede "
                                 "the announcement")
        for c, s in self.specs.items():
            s.atlas.check_ground(cars)

    @property
    def atlas(self) -> PropositionAtlas:
        out = PropositionAtlas(())
        for c in sorted(self.specs):
            out = out.merged(self.specs[c].atlas)
        return out


# --------------------------------------------------------------------------
# car controller
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CarController:
    car: str
    spec: CarSpec
    state: str = "q0"
    region: frozenset = frozenset()
    scale: int = 1
    pending: TimedWord = TimedWord()
    observed: TimedWord = TimedWord()

    @classmethod
    def start(cls, car: str, spec: CarSpec, sc: Scenario) -> "CarController":
        c = cls(car, spec)
        return replace(c, **_retrack(c, sc, 0.0))


def _retrack(ctrl: CarController, sc: Scenario, t: float) -> dict:
    m = trace_states(sc.snapshot, ctrl.observed, ctrl.spec.atlas, t, sc.geometry)
    k = time_scale(m)
    r = automaton_for(ctrl.spec.formula, k)
    ms = rescale(m, k) if k != 1 else m
    tr = Tracker(r, ms.alphabet)
    p0, steps, _ = _unit_plan(ms)
    cur = tr.start(p0)
    for lab_o, lab_p in steps:
        cur = tr.step(cur, lab_o, lab_p)
    return {"region": frozenset(cur), "scale": k}


def announced_sequences(ctrl: CarController, sc: Scenario, t: float) -> frozenset:
    """State sequences from ``t`` to the horizon along bad-free region paths."""
    r = automaton_for(ctrl.spec.formula, ctrl.scale)
    units = (Fraction(sc.horizon) - Fraction(t)) * ctrl.scale
    pis = candidate_sequences(r, ctrl.region, units, start=Fraction(t), max_changes=sc.max_changes,
                              cap=sc.max_sequences)
    out = set()
    for pi in pis:
        m = to_state_sequence(pi)
        if m.end > sc.horizon:
            m = m.truncated(Fraction(sc.horizon))
        out.add(m)
    return frozenset(out)


def controller_step(ctrl: CarController, event, sc: Scenario) -> tuple[CarController, list, str]:
    """One edge of the controller; returns (controller, emitted, edge label)."""
    s = ctrl.state
    if s == "q0" and isinstance(event, Com):
        obs = TimedWord(ctrl.observed.entries + ((event.action, event.t),))
        c = replace(ctrl, observed=obs)
        c = replace(c, **_retrack(c, sc, event.t))
        return c, [], f"q0->q0 com?({event.action},{_fmt(event.t)}) |R|={len(c.region)}"
    if s == "q0" and isinstance(event, Announce):
        plans = announced_sequences(ctrl, sc, event.t)
        return replace(ctrl, state="q1"), [Send(ctrl.car, plans)], f"q0->q1 send!({len(plans)} sequences)"
    if s == "q1" and isinstance(event, Receive) and event.car == ctrl.car:
        return replace(ctrl, state="q2", pending=event.omega), [], f"q1->q2 receive?{event.omega}"
    if s == "q2" and isinstance(event, Tick):
        if not ctrl.pending.entries:
            return replace(ctrl, state="q3"), [], "q2->q3 is_empty"
        (a, ta), rest = ctrl.pending.entries[0], ctrl.pending.entries[1:]
        if ta > event.t + 1e-12:
            raise ProtocolError(f"{ctrl.car}: tick at {_fmt(event.t)} before the next stamp {_fmt(ta)}")
        if ta < event.t - 1e-12:
            raise ProtocolError(f"{ctrl.car}: action {a} stamped {_fmt(ta)} missed at {_fmt(event.t)}")
        return (replace(ctrl, pending=TimedWord(rest)), [Com(ctrl.car, a, ta)],
                f"q2->q2 com!({a},{_fmt(ta)})")
    raise ProtocolError(f"controller {ctrl.car} in {s} has no edge for {event}")


# --------------------------------------------------------------------------
# road-side unit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    """Internal progress event of the RSU."""

    name: str


@dataclass(frozen=True)
class Attempt:
    sequence: str
    branch: int
    verdict: str
    reason: str = ""


@dataclass(frozen=True)
class Rsu:
    cars: tuple
    state: str = "p0"
    store: Mapping[str, frozenset] = field(default_factory=dict)
    combined: tuple = ()
    solution: TimedWord = TimedWord()
    to_inform: tuple = ()
    chosen: Optional[TimedStateSequence] = None
    attempts: tuple = ()
    reason: str = ""


def _fmt(t) -> str:
    return format(float(t), ".9g")


def _word_from_plan(plan: PiecewisePlan, spec: DynSpec, t0: float) -> list:
    """The plan's SetAcc actions shifted by ``t0``, without no-op changes."""
    cur = dict(spec.acc0)
    out = []
    for a, t in plan.to_word(spec.controlled):
        if a.acc != cur[a.car]:
            out.append((a, t0 + t))
            cur[a.car] = a.acc
    return out


def solve_sequence(m: TimedStateSequence, sc: Scenario, ts: TrafficSnapshot, controllable) -> tuple:
    """Try to realize ``m`` from snapshot ``ts``; returns (word or None, attempts)."""
    atlas = sc.atlas
    t0 = float(m.start)
    text = str(m)
    acts = discrete_actions(m, atlas, ts, sc.geometry)
    if acts is None:
        return None, [Attempt(text, -1, "skipped", "discrete literals cannot be realized")]
    attempts = []
    for b, phases in enumerate(dyn_branches(m, atlas)):
        spec = DynSpec.from_snapshot(ts, phases, sc.bounds, controllable, sc.geometry)
        why = kinematic_infeasibility(spec)
        if why:
            attempts.append(Attempt(text, b, "infeasible", why))
            continue
        keep = PiecewisePlan((), {c: (spec.acc0[c],) for c in spec.controlled}, spec.horizon)
        if check_plan(keep, spec).ok:
            plan = keep
        else:
            d = decide_acceleration(spec)
            if not d.feasible:
                attempts.append(Attempt(text, b, d.status, d.reason))
                continue
            plan = d.plan
        attempts.append(Attempt(text, b, "feasible"))
        entries = sorted(_word_from_plan(plan, spec, t0) + acts, key=lambda e: (e[1], e[0].car))
        return TimedWord(tuple(entries)), attempts
    if not attempts:
        attempts.append(Attempt(text, -1, "skipped", "gap literals are contradictory"))
    return None, attempts


def rsu_step(rsu: Rsu, event, sc: Scenario, ts: Optional[TrafficSnapshot] = None) -> tuple[Rsu, list, str]:
    """One edge of the RSU; ``ts`` is the snapshot at the current time (needed in p1)."""
    s = rsu.state
    if s == "p0" and isinstance(event, Send):
        store = {**rsu.store, event.car: event.plans}
        return replace(rsu, store=store), [], f"p0->p0 D.push({event.car},{len(event.plans)})"
    if s == "p0" and event == Step("combine"):
        if set(rsu.store) != set(rsu.cars):
            raise ProtocolError(f"RSU cannot combine before all of {list(rsu.cars)} announced")
        try:
            pi = tuple(combine_all(rsu.store, sc.atlas, cap=sc.max_sequences))
            why = ""
        except (ValueError, RegionCapError) as exc:
            pi, why = (), str(exc)
        return replace(rsu, state="p1", combined=pi, reason=why), [], f"p0->p1 combine |Pi|={len(pi)}"
    if s == "p1" and event == Step("solve"):
        attempts = []
        for m in rsu.combined:
            word, att = solve_sequence(m, sc, ts, rsu.cars)
            attempts += att
            if word is not None:
                return (replace(rsu, state="p2", solution=word, to_inform=rsu.cars, chosen=m,
                                attempts=tuple(attempts)), [], f"p1->p2 omega={word} m={m}")
        why = rsu.reason or "no combined sequence has an acceleration schedule"
        return replace(rsu, state="p3", attempts=tuple(attempts), reason=why), [], f"p1->p3 {why}"
    if s == "p2" and event == Step("inform"):
        if not rsu.to_inform:
            return replace(rsu, state="p4"), [], "p2->p4 is_empty"
        car, rest = rsu.to_inform[0], rsu.to_inform[1:]
        w = rsu.solution.for_car(car)
        return replace(rsu, to_inform=rest), [Receive(car, w)], f"p2->p2 inform!({car},{w})"
    raise ProtocolError(f"RSU in {s} has no edge for {event}")


# --------------------------------------------------------------------------
# episodes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FallbackPair:
    rear: str
    front: str
    gap: float
    braking_distance: float

    @property
    def ok(self) -> bool:
        return self.gap >= self.braking_distance


def fallback_check(ts: TrafficSnapshot, geom: Mapping[str, CarGeometry]) -> tuple[FallbackPair, ...]:
    """Gaps between cars sharing a lane against the rear car's braking distance."""
    out = []
    cars = sorted(ts.cars, key=lambda c: (ts.pos[c], c))
    for i, rear in enumerate(cars):
        mine = ts.res[rear] | ts.clm[rear]
        for front in cars[i + 1:]:
            if mine & (ts.res[front] | ts.clm[front]):
                out.append(FallbackPair(rear, front, gap(ts, rear, front, geom), geom[rear].braking_distance))
                break
    return tuple(out)


@dataclass(frozen=True)
class EpisodeResult:
    verdict: str
    executed: TimedWord
    trace: tuple
    final: TrafficSnapshot
    omega: Optional[TimedWord] = None
    satisfied: Mapping[str, bool] = field(default_factory=dict)
    controllers: Mapping[str, str] = field(default_factory=dict)
    rsu_state: str = "p0"
    fallback: Optional[tuple] = None
    chosen: Optional[TimedStateSequence] = None
    reason: str = ""

    @property
    def fallback_ok(self) -> Optional[bool]:
        return None if self.fallback is None else all(p.ok for p in self.fallback)

    def summary(self) -> dict:
        return {
            "verdict": self.verdict,
            "omega": None if self.omega is None else str(self.omega),
            "executed": str(self.executed),
            "satisfied": dict(sorted(self.satisfied.items())),
            "controllers": dict(sorted(self.controllers.items())),
            "rsu": self.rsu_state,
            "fallback_ok": self.fallback_ok,
            "reason": self.reason,
        }


def run_episode(sc: Scenario) -> EpisodeResult:
    trace: list[str] = [f"t={_fmt(0)} episode seed={sc.seed} horizon={_fmt(sc.horizon)}"]

    def log(t, who, edge):
        trace.append(f"t={_fmt(t)} {who} {edge}")

    ctrls = {c: CarController.start(c, sc.specs[c], sc) for c in sorted(sc.specs)}
    order = tuple(sorted(ctrls))
    rsu = Rsu(order)
    executed: list = []

    def broadcast(msg: Com):
        for c in order:
            if ctrls[c].state == "q0" and c != msg.car:
                ctrls[c], _, edge = controller_step(ctrls[c], msg, sc)
                log(msg.t, c, edge)

    def result(verdict, reason="", fallback=None, satisfied=None):
        w = TimedWord(tuple(executed))
        evo = run_word(sc.snapshot, w, sc.horizon)
        return EpisodeResult(verdict, w, tuple(trace), evo.final, rsu.solution if rsu.state in ("p2", "p4") else None,
                             satisfied or {}, {c: k.state for c, k in ctrls.items()}, rsu.state, fallback,
                             rsu.chosen, reason)

    try:
        for a, t in sc.external:
            executed.append((a, t))
            log(t, a.car, f"com!({a},{_fmt(t)})")
            broadcast(Com(a.car, a, t))
        now = sc.announce_at
        for c in order:
            ctrls[c], out, edge = controller_step(ctrls[c], Announce(now), sc)
            log(now, c, edge)
            for msg in out:
                rsu, _, edge = rsu_step(rsu, msg, sc)
                log(now, "RSU", edge)
        ts_now = run_word(sc.snapshot, TimedWord(tuple(executed)), now).final
        rsu, _, edge = rsu_step(rsu, Step("combine"), sc)
        log(now, "RSU", edge)
        rsu, _, edge = rsu_step(rsu, Step("solve"), sc, ts_now)
        log(now, "RSU", edge)
        if rsu.state == "p3":
            fb = fallback_check(ts_now, sc.geometry)
            ok = all(p.ok for p in fb)
            log(now, "RSU", f"fallback {'ok' if ok else 'violated'} " +
                " ".join(f"gap({p.rear},{p.front})={p.gap:.6g}/bd={p.braking_distance:.6g}" for p in fb))
            return result("Infeasible", rsu.reason, fb)
        while rsu.state == "p2":
            rsu, out, edge = rsu_step(rsu, Step("inform"), sc)
            log(now, "RSU", edge)
            for msg in out:
                ctrls[msg.car], _, edge = controller_step(ctrls[msg.car], msg, sc)
                log(now, msg.car, edge)
        while True:
            for c in order:
                if ctrls[c].state == "q2" and not ctrls[c].pending.entries:
                    ctrls[c], _, edge = controller_step(ctrls[c], Tick(now), sc)
                    log(now, c, edge)
            busy = [c for c in order if ctrls[c].state == "q2"]
            if not busy:
                break
            now = max(now, min(ctrls[c].pending.entries[0][1] for c in busy))
            for c in busy:
                if abs(ctrls[c].pending.entries[0][1] - now) <= 1e-12:
                    ctrls[c], out, edge = controller_step(ctrls[c], Tick(now), sc)
                    log(now, c, edge)
                    for msg in out:
                        executed.append((msg.action, msg.t))
                        broadcast(msg)
        stuck = [c for c in order if ctrls[c].state != "q3"]
        if stuck:
            raise ProtocolError(f"deadlock: controllers {stuck} did not reach q3")
    except ProtocolError as exc:
        log(now if "now" in locals() else 0.0, "episode", f"protocol-error {exc}")
        return result("ProtocolError", str(exc))

    m = trace_states(sc.snapshot, TimedWord(tuple(executed)), sc.atlas, sc.horizon, sc.geometry)
    sat = {c: eval_finite(m, sc.specs[c].formula, sc.horizon) for c in order}
    for c in order:
        log(sc.horizon, c, f"check {'sat' if sat[c] else 'VIOLATED'}")
    if not all(sat.values()):
        return result("Violated", "post-hoc check failed", satisfied=sat)
    return result("Enforced", satisfied=sat)
