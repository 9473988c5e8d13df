"""Motorway traffic snapshots and their transition semantics.

A snapshot stores, per car, the reserved and claimed lanes, the rear-end
position, the speed and the acceleration.  Time passage integrates the
constant-acceleration kinematics exactly; actions overwrite single entries.
Speeds are never clamped here, dynamic bounds only matter to the planner.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union


class TrafficError(ValueError):
    """Raised for malformed snapshots or actions whose preconditions fail."""


@dataclass(frozen=True)
class RoadConfig:
    lane_count: int
    car_ids: tuple[str, ...]

    def __post_init__(self):
        if self.lane_count < 1:
            raise TrafficError("lane_count must be >= 1")
        if not self.car_ids:
            raise TrafficError("at least one car is required")
        if len(set(self.car_ids)) != len(self.car_ids):
            raise TrafficError("duplicate car identifiers")

    @property
    def lanes(self) -> range:
        return range(1, self.lane_count + 1)


@dataclass(frozen=True)
class CarGeometry:
    size: float
    braking_distance: float = 0.0

    def __post_init__(self):
        if not self.size > 0:
            raise TrafficError("car size must be positive")
        if self.braking_distance < 0:
            raise TrafficError("braking distance must be non-negative")


@dataclass(frozen=True)
class DynamicBounds:
    acc_min: float
    acc_max: float
    spd_max: float
    spd_min: float = 0.0

    def __post_init__(self):
        if not (self.acc_min < 0 < self.acc_max):
            raise TrafficError("need acc_min < 0 < acc_max")
        if not self.spd_max > 0:
            raise TrafficError("spd_max must be positive")


# --------------------------------------------------------------------------
# actions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Claim:
    car: str
    lane: int

    def __str__(self):
        return f"c({self.car},{self.lane})"


@dataclass(frozen=True)
class WithdrawClaim:
    car: str

    def __str__(self):
        return f"wd_c({self.car})"


@dataclass(frozen=True)
class Reserve:
    car: str

    def __str__(self):
        return f"r({self.car})"


@dataclass(frozen=True)
class WithdrawReserve:
    car: str
    lane: int

    def __str__(self):
        return f"wd_r({self.car},{self.lane})"


@dataclass(frozen=True)
class SetAcc:
    car: str
    acc: float

    def __post_init__(self):
        if self.acc != self.acc or self.acc in (float("inf"), float("-inf")):
            raise TrafficError("acceleration must be finite")

    def __str__(self):
        return f"acc({self.car},{self.acc:g})"


Action = Union[Claim, WithdrawClaim, Reserve, WithdrawReserve, SetAcc]


@dataclass(frozen=True)
class TimedWord:
    """Time-stamped action sequence; stamps must be non-decreasing."""

    entries: tuple[tuple[Action, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((a, float(t)) for a, t in self.entries))
        last = 0.0
        for _, t in self.entries:
            if t < 0:
                raise TrafficError("timestamps must be non-negative")
            if t < last:
                raise TrafficError("timestamps must be non-decreasing")
            last = t

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def for_car(self, car: str) -> "TimedWord":
        return TimedWord(tuple((a, t) for a, t in self.entries if a.car == car))

    def __str__(self):
        return "<" + ", ".join(f"({a},{t:g})" for a, t in self.entries) + ">"


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------

def _freeze(d: Mapping) -> Mapping:
    return MappingProxyType(dict(d))


@dataclass(frozen=True, eq=False)
class TrafficSnapshot:
    res: Mapping[str, frozenset]
    clm: Mapping[str, frozenset]
    pos: Mapping[str, float]
    spd: Mapping[str, float]
    acc: Mapping[str, float]
    lane_count: int = 1
    check_sanity: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "res", _freeze({c: frozenset(v) for c, v in self.res.items()}))
        object.__setattr__(self, "clm", _freeze({c: frozenset(v) for c, v in self.clm.items()}))
        for name in ("pos", "spd", "acc"):
            object.__setattr__(self, name, _freeze({c: float(v) for c, v in getattr(self, name).items()}))
        cars = set(self.res)
        for name in ("clm", "pos", "spd", "acc"):
            if set(getattr(self, name)) != cars:
                raise TrafficError(f"map {name!r} does not cover exactly the cars {sorted(cars)}")
        if self.check_sanity:
            self.validate()

    def validate(self) -> None:
        for c in self.res:
            r, k = self.res[c], self.clm[c]
            if not 1 <= len(r) <= 2:
                raise TrafficError(f"car {c}: needs 1 or 2 reserved lanes, got {sorted(r)}")
            if len(k) > 1:
                raise TrafficError(f"car {c}: at most one claimed lane")
            if r & k:
                raise TrafficError(f"car {c}: claim overlaps reservation")
            for lane in r | k:
                if not 1 <= lane <= self.lane_count:
                    raise TrafficError(f"car {c}: lane {lane} outside 1..{self.lane_count}")

    @property
    def cars(self) -> tuple[str, ...]:
        return tuple(self.res)

    def with_(self, **maps) -> "TrafficSnapshot":
        return replace(self, **maps)

    def __eq__(self, other):
        if not isinstance(other, TrafficSnapshot):
            return NotImplemented
        return (self.lane_count == other.lane_count
                and dict(self.res) == dict(other.res) and dict(self.clm) == dict(other.clm)
                and dict(self.pos) == dict(other.pos) and dict(self.spd) == dict(other.spd)
                and dict(self.acc) == dict(other.acc))

    def isclose(self, other: "TrafficSnapshot", tol: float = 1e-9) -> bool:
        if dict(self.res) != dict(other.res) or dict(self.clm) != dict(other.clm):
            return False
        return all(abs(getattr(self, m)[c] - getattr(other, m)[c]) <= tol * max(1.0, abs(getattr(self, m)[c]))
                   for m in ("pos", "spd", "acc") for c in self.cars)

    def __repr__(self):
        cars = ", ".join(f"{c}: res={sorted(self.res[c])} clm={sorted(self.clm[c])} pos={self.pos[c]:g} "
                         f"spd={self.spd[c]:g} acc={self.acc[c]:g}" for c in self.cars)
        return f"TrafficSnapshot({cars})"


def snapshot(cars: Mapping[str, Mapping], lane_count: int = 1, check_sanity: bool = True) -> TrafficSnapshot:
    """Build a snapshot from ``{car: {"res": .., "clm": .., "pos": .., "spd": .., "acc": ..}}``."""
    return TrafficSnapshot(
        res={c: frozenset(v.get("res", (1,))) for c, v in cars.items()},
        clm={c: frozenset(v.get("clm", ())) for c, v in cars.items()},
        pos={c: v.get("pos", 0.0) for c, v in cars.items()},
        spd={c: v.get("spd", 0.0) for c, v in cars.items()},
        acc={c: v.get("acc", 0.0) for c, v in cars.items()},
        lane_count=lane_count,
        check_sanity=check_sanity,
    )


def pass_time(ts: TrafficSnapshot, t: float) -> TrafficSnapshot:
    if t < 0:
        raise TrafficError(f"cannot pass negative time {t}")
    if t == 0:
        return ts
    pos = {c: ts.pos[c] + ts.spd[c] * t + 0.5 * ts.acc[c] * t * t for c in ts.cars}
    spd = {c: ts.spd[c] + ts.acc[c] * t for c in ts.cars}
    return replace(ts, pos=pos, spd=spd)


def apply_action(ts: TrafficSnapshot, a: Action) -> TrafficSnapshot:
    c = a.car
    if c not in ts.res:
        raise TrafficError(f"unknown car {c!r}")
    if isinstance(a, SetAcc):
        return replace(ts, acc={**ts.acc, c: a.acc})
    if isinstance(a, Claim):
        if not 1 <= a.lane <= ts.lane_count:
            raise TrafficError(f"lane {a.lane} does not exist")
        if ts.check_sanity:
            if len(ts.res[c]) != 1 or ts.clm[c]:
                raise TrafficError(f"car {c} cannot claim while changing lanes or already claiming")
            (own,) = ts.res[c]
            if abs(own - a.lane) != 1:
                raise TrafficError(f"claimed lane {a.lane} is not adjacent to lane {own}")
        return replace(ts, clm={**ts.clm, c: frozenset({a.lane})})
    if isinstance(a, WithdrawClaim):
        if not ts.clm[c]:
            return ts
        return replace(ts, clm={**ts.clm, c: frozenset()})
    if isinstance(a, Reserve):
        if not ts.clm[c]:
            raise TrafficError(f"car {c} has no claim to turn into a reservation")
        return replace(ts, res={**ts.res, c: ts.res[c] | ts.clm[c]}, clm={**ts.clm, c: frozenset()})
    if isinstance(a, WithdrawReserve):
        if a.lane not in ts.res[c]:
            raise TrafficError(f"car {c} does not reserve lane {a.lane}")
        return replace(ts, res={**ts.res, c: frozenset({a.lane})})
    raise TrafficError(f"unsupported action {a!r}")


@dataclass(frozen=True)
class Evolution:
    """Snapshots sampled at time 0, at every action stamp and at the horizon."""

    samples: tuple[tuple[TrafficSnapshot, float], ...]

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def final(self) -> TrafficSnapshot:
        return self.samples[-1][0]

    @property
    def times(self) -> list[float]:
        return [t for _, t in self.samples]

    def at(self, t: float) -> TrafficSnapshot:
        """Snapshot at time ``t`` (after any actions stamped exactly ``t``)."""
        best = None
        for ts, ti in self.samples:
            if ti <= t:
                best = (ts, ti)
            else:
                break
        if best is None:
            raise TrafficError(f"time {t} precedes the evolution")
        return pass_time(best[0], t - best[1])


def run_word(ts0: TrafficSnapshot, w: TimedWord | Sequence[tuple[Action, float]], horizon: float) -> Evolution:
    if not isinstance(w, TimedWord):
        w = TimedWord(tuple(w))
    if w.entries and horizon < w.entries[-1][1]:
        raise TrafficError("horizon precedes the last action")
    samples = [(ts0, 0.0)]
    ts, now = ts0, 0.0
    for i, (a, t) in enumerate(w.entries):
        ts = pass_time(ts, t - now)
        now = t
        try:
            ts = apply_action(ts, a)
        except TrafficError as exc:
            raise TrafficError(f"action #{i} {a} at t={t:g}: {exc}") from exc
        if samples[-1][1] == now:
            samples[-1] = (ts, now)
        else:
            samples.append((ts, now))
    if horizon > now:
        samples.append((pass_time(ts, horizon - now), float(horizon)))
    return Evolution(tuple(samples))


def gap(ts: TrafficSnapshot, rear: str, front: str, geom: Mapping[str, CarGeometry]) -> float:
    """Free length between the front of ``rear`` and the rear end of ``front``."""
    for c in (rear, front):
        if c not in ts.pos:
            raise TrafficError(f"unknown car {c!r}")
    return ts.pos[front] - (ts.pos[rear] + geom[rear].size)


def split_word(w: TimedWord, cars: Iterable[str]) -> dict[str, TimedWord]:
    return {c: w.for_car(c) for c in cars}
