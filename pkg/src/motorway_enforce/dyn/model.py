"""Constraint systems over piecewise-constant accelerations and their exact check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..mlsls import GapConstraint
from ..sequence import Interval
from ..traffic import CarGeometry, DynamicBounds, SetAcc, TimedWord, TrafficSnapshot

_OPS = {
    "<": lambda k: (-math.inf, k, True, False),
    "<=": lambda k: (-math.inf, k, True, True),
    "=": lambda k: (k, k, True, True),
    ">=": lambda k: (k, math.inf, True, True),
    ">": lambda k: (k, math.inf, False, True),
}


def gap_atom(rear: str, front: str, op: str, k: float) -> GapConstraint:
    """``gap(rear, front) op k`` as an interval constraint."""
    if op not in _OPS:
        raise ValueError(f"bad comparison {op!r}")
    return GapConstraint(rear, front, *_OPS[op](float(k)))


@dataclass(frozen=True)
class Phase:
    """Gap constraints required throughout ``interval``; ``theta`` may be empty."""

    theta: tuple
    interval: Interval

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(self.theta))


@dataclass(frozen=True)
class DynSpec:
    phases: tuple
    pos0: Mapping[str, float]
    spd0: Mapping[str, float]
    acc0: Mapping[str, float]
    bounds: DynamicBounds
    controllable: frozenset
    sizes: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        object.__setattr__(self, "controllable", frozenset(self.controllable))
        if not self.phases:
            raise ValueError("a DYN spec needs at least one phase")
        first = self.phases[0].interval
        if first.lo != 0 or not first.lo_closed:
            raise ValueError("phases must start with a closed border at 0")
        for a, b in zip(self.phases, self.phases[1:]):
            if a.interval.hi != b.interval.lo or a.interval.hi_closed == b.interval.lo_closed:
                raise ValueError(f"phases {a.interval} and {b.interval} are not adjacent")
        cars = set(self.pos0)
        if set(self.spd0) != cars or set(self.acc0) != cars:
            raise ValueError("pos0, spd0 and acc0 must cover the same cars")
        for v in (*self.pos0.values(), *self.spd0.values(), *self.acc0.values()):
            if not math.isfinite(v):
                raise ValueError("initial values must be finite")
        if not self.controllable <= cars:
            raise ValueError("controllable cars must be known")
        for ph in self.phases:
            for g in ph.theta:
                if g.rear not in cars or g.front not in cars:
                    raise ValueError(f"constraint {g} mentions an unknown car")
                if g.rear not in self.sizes:
                    raise ValueError(f"size of car {g.rear} is unknown")

    @property
    def horizon(self) -> float:
        return float(self.phases[-1].interval.hi)

    @property
    def cars(self) -> tuple:
        return tuple(sorted(self.pos0))

    @property
    def controlled(self) -> tuple:
        return tuple(sorted(self.controllable))

    def pairs(self) -> tuple:
        return tuple(sorted({g.pair for ph in self.phases for g in ph.theta}))

    @classmethod
    def from_snapshot(cls, ts: TrafficSnapshot, phases: Sequence[Phase], bounds: DynamicBounds,
                      controllable: Iterable[str], geom: Mapping[str, CarGeometry]) -> "DynSpec":
        return cls(tuple(phases), dict(ts.pos), dict(ts.spd), dict(ts.acc), bounds, frozenset(controllable),
                   {c: g.size for c, g in geom.items()})

    def truncated(self, x: float) -> "DynSpec":
        """Phases restricted to ``[0, x]``; the phase containing ``x`` is cut there."""
        out = []
        for ph in self.phases:
            iv = ph.interval
            if iv.lo > x or (iv.lo == x and not iv.lo_closed):
                break
            if iv.hi > x or (iv.hi == x and not iv.hi_closed):
                iv = Interval(iv.lo, x, iv.lo_closed, True) if iv.lo < x or iv.lo_closed else iv
                out.append(Phase(ph.theta, iv))
                break
            out.append(ph)
        return DynSpec(tuple(out), self.pos0, self.spd0, self.acc0, self.bounds, self.controllable, self.sizes)

    def prefix(self, i: int) -> "DynSpec":
        return DynSpec(self.phases[:i], self.pos0, self.spd0, self.acc0, self.bounds, self.controllable, self.sizes)


@dataclass(frozen=True)
class DynSystem:
    """DYN(m, n, I); with ``relaxed`` the constraints of the last phase are dropped (DYN')."""

    spec: DynSpec
    n: int
    relaxed: bool = False

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")

    def active_phases(self) -> tuple:
        return self.spec.phases[:-1] if self.relaxed else self.spec.phases


# --------------------------------------------------------------------------
# kinematics
# --------------------------------------------------------------------------

def segment_matrices(borders: np.ndarray, t: np.ndarray):
    """Per segment, the speed and position gained per unit acceleration by time ``t``.

    ``borders`` are ``0 = b_0 <= ... <= b_{n+1} = T``; returns arrays of shape
    ``(len(t), n+1)``.  The last segment keeps running past ``T``.
    """
    b = np.asarray(borders, float)
    t = np.asarray(t, float)[:, None]
    lo, hi = b[None, :-1], b[None, 1:].copy()
    hi[0, -1] = np.inf
    d = hi - lo
    tau = np.clip(t - lo, 0.0, d)
    dfin = np.where(np.isinf(d), 0.0, d)
    hfin = np.where(np.isinf(hi), 0.0, hi)
    pos = np.where(t <= lo, 0.0, np.where(t <= hi, 0.5 * (t - lo) ** 2, 0.5 * dfin ** 2 + dfin * (t - hfin)))
    return tau, pos


@dataclass(frozen=True)
class PiecewisePlan:
    """Shared splitting points and per-car accelerations for each segment."""

    splits: tuple
    acc: Mapping[str, tuple]
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "splits", tuple(float(s) for s in self.splits))
        object.__setattr__(self, "acc", {c: tuple(float(a) for a in v) for c, v in self.acc.items()})
        if any(b < a for a, b in zip(self.borders, self.borders[1:])):
            raise ValueError("splitting points must be sorted inside [0, horizon]")
        for c, v in self.acc.items():
            if len(v) != len(self.splits) + 1:
                raise ValueError(f"car {c}: need {len(self.splits) + 1} accelerations, got {len(v)}")

    @property
    def n(self) -> int:
        return len(self.splits)

    @property
    def borders(self) -> tuple:
        return (0.0, *self.splits, float(self.horizon))

    def segments(self, car: str) -> list[tuple[float, float]]:
        b = self.borders
        return [(a, b[j + 1] - b[j]) for j, a in enumerate(self.acc[car])]

    def to_word(self, cars: Iterable[str] | None = None) -> TimedWord:
        """SetAcc actions at every segment start with positive duration."""
        entries = []
        b = self.borders
        for c in sorted(cars if cars is not None else self.acc):
            for j, a in enumerate(self.acc[c]):
                if j == 0 or b[j + 1] > b[j]:
                    entries.append((SetAcc(c, a), b[j]))
        entries.sort(key=lambda e: (e[1], e[0].car))
        out = []
        for a, t in entries:
            if out and out[-1][1] == t and out[-1][0].car == a.car:
                out[-1] = (a, t)
            else:
                out.append((a, t))
        return TimedWord(tuple(out))


def car_state(spec: DynSpec, plan: PiecewisePlan, car: str, t):
    """Closed-form ``(pos, spd)`` of ``car`` at time(s) ``t``."""
    t = np.atleast_1d(np.asarray(t, float))
    p0, v0 = spec.pos0[car], spec.spd0[car]
    if car in plan.acc:
        tau, pos = segment_matrices(np.array(plan.borders), t)
        a = np.array(plan.acc[car])
        return p0 + v0 * t + pos @ a, v0 + tau @ a
    a0 = spec.acc0[car]
    return p0 + v0 * t + 0.5 * a0 * t * t, v0 + a0 * t


def gap_at(spec: DynSpec, plan: PiecewisePlan, rear: str, front: str, t):
    pr, _ = car_state(spec, plan, rear, t)
    pf, _ = car_state(spec, plan, front, t)
    return pf - pr - spec.sizes[rear]


# --------------------------------------------------------------------------
# exact verification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    time: float
    margin: float
    detail: str

    def __str__(self):
        return f"{self.detail} at t={self.time:g} (margin {self.margin:.3g})"


@dataclass(frozen=True)
class CheckReport:
    ok: bool
    violations: tuple = ()
    margins: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok

    @property
    def first(self) -> Violation | None:
        return self.violations[0] if self.violations else None


def _pieces(iv: Interval, borders, horizon):
    """Sub-intervals of ``iv`` cut at segment borders, as (lo, hi, lo_closed, hi_closed)."""
    lo, hi = float(iv.lo), min(float(iv.hi), horizon)
    if lo > horizon:
        return []
    cuts = [lo] + [b for b in borders if lo < b < hi] + [hi]
    out = []
    for k in range(len(cuts) - 1):
        out.append((cuts[k], cuts[k + 1], iv.lo_closed if k == 0 else True,
                    iv.hi_closed if k == len(cuts) - 2 else True))
    if lo == hi:
        out = [(lo, lo, True, True)]
    return out


def _margin(g: GapConstraint, v: float) -> float:
    m = math.inf
    if not math.isinf(g.lo):
        m = min(m, v - g.lo)
    if not math.isinf(g.hi):
        m = min(m, g.hi - v)
    return m


def acc_at(spec: DynSpec, plan: PiecewisePlan, car: str, t: float) -> float:
    """Acceleration of ``car`` on the segment containing ``t`` (right-continuous)."""
    if car not in plan.acc:
        return spec.acc0[car]
    j = int(np.searchsorted(np.array(plan.splits), t, side="right"))
    return plan.acc[car][j]


def check_plan(plan: PiecewisePlan, spec: DynSpec, relaxed: bool = False, tol: float = 1e-9) -> CheckReport:
    """Exact check: bounds on accelerations and speeds, gap constraints by the vertex test.

    Non-strict bounds may be missed by at most ``tol``; strict bounds must hold
    with a positive margin at every point inside their phase, while at an open
    phase end only the closure is required.
    """
    T = spec.horizon
    viols: list[Violation] = []
    margins: dict = {}
    bd = spec.bounds
    if abs(plan.horizon - T) > 1e-12:
        viols.append(Violation("horizon", plan.horizon, -abs(plan.horizon - T), "plan horizon differs from spec"))
    borders = np.array(plan.borders)
    for c in spec.controlled:
        if c not in plan.acc:
            viols.append(Violation("plan", 0.0, -math.inf, f"no accelerations for car {c}"))
            continue
        for j, a in enumerate(plan.acc[c]):
            m = min(a - bd.acc_min, bd.acc_max - a)
            margins[("acc", c, j)] = m
            if m < -tol:
                viols.append(Violation("acc", borders[j], m, f"acc bound, car {c}, segment {j + 1}"))
        _, v = car_state(spec, plan, c, borders)
        for t, s in zip(borders, v):
            m = min(s - bd.spd_min, bd.spd_max - s)
            margins[("spd", c, float(t))] = m
            if m < -tol:
                viols.append(Violation("spd", float(t), m, f"speed bound, car {c}"))
    phases = spec.phases[:-1] if relaxed else spec.phases
    for k, ph in enumerate(phases):
        for g in ph.theta:
            worst = math.inf
            pts = []
            for lo, hi, lc, hc in _pieces(ph.interval, borders[1:-1], T):
                if hi == lo:
                    pts.append((lo, lc and hc))
                    continue
                pts += [(lo, lc), (hi, hc)]
                mid = 0.5 * (lo + hi)
                pts.append((mid, True))
                da = acc_at(spec, plan, g.front, mid) - acc_at(spec, plan, g.rear, mid)
                if da != 0:
                    dv = float(car_state(spec, plan, g.front, lo)[1][0] - car_state(spec, plan, g.rear, lo)[1][0])
                    tv = lo - dv / da
                    if lo < tv < hi:
                        pts.append((tv, True))
            if not pts:
                continue
            vals = gap_at(spec, plan, g.rear, g.front, [t for t, _ in pts])
            for (t, exact), val in zip(pts, vals):
                m = _margin(g, float(val))
                worst = min(worst, m)
                if not _holds(g, float(val), exact, tol):
                    viols.append(Violation("gap", float(t), m, f"{g} in phase {k + 1}"))
            margins[("gap", k, str(g))] = worst
    viols.sort(key=lambda v: v.time)
    return CheckReport(not viols, tuple(viols), margins)


def _holds(g: GapConstraint, v: float, exact: bool, tol: float) -> bool:
    """Whether ``v`` satisfies ``g`` (``exact``) or its closure (not ``exact``)."""
    if not math.isinf(g.lo):
        if g.lo_closed or not exact:
            if v < g.lo - tol:
                return False
        elif not v > g.lo:
            return False
    if not math.isinf(g.hi):
        if g.hi_closed or not exact:
            if v > g.hi + tol:
                return False
        elif not v < g.hi:
            return False
    return True
