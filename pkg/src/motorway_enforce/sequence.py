"""Timed sequences of states: proposition sets over adjacent real intervals."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.hi < self.lo or (self.hi == self.lo and not (self.lo_closed and self.hi_closed)):
            raise ValueError(f"empty interval {self}")

    @classmethod
    def point(cls, t) -> "Interval":
        return cls(t, t, True, True)

    @classmethod
    def open(cls, lo, hi) -> "Interval":
        return cls(lo, hi, False, False)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def length(self):
        return self.hi - self.lo

    def contains(self, t) -> bool:
        if t < self.lo or t > self.hi:
            return False
        if t == self.lo and not self.lo_closed:
            return False
        if t == self.hi and not self.hi_closed:
            return False
        return True

    def contains_interval(self, other: "Interval") -> bool:
        if other.lo < self.lo or other.hi > self.hi:
            return False
        if other.lo == self.lo and other.lo_closed and not self.lo_closed:
            return False
        if other.hi == self.hi and other.hi_closed and not self.hi_closed:
            return False
        return True

    def midpoint(self):
        return (self.lo + self.hi) / 2

    def __str__(self):
        return f"{'[' if self.lo_closed else '('}{_num(self.lo)},{_num(self.hi)}{']' if self.hi_closed else ')'}"


def _num(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


@dataclass(frozen=True)
class Phase:
    state: frozenset
    interval: Interval

    def __iter__(self):
        return iter((self.state, self.interval))


@dataclass(frozen=True)
class TimedStateSequence:
    """Adjacent phases ``(state, interval)``.

    ``alphabet`` lists the propositions the sequence is complete about: inside
    it a missing proposition is false, outside it the value is unknown.  When
    omitted it defaults to every proposition mentioned in some state.
    """

    phases: tuple[Phase, ...]
    alphabet: Optional[frozenset] = field(default=None)

    def __post_init__(self):
        phases = tuple(p if isinstance(p, Phase) else Phase(frozenset(p[0]), p[1]) for p in self.phases)
        object.__setattr__(self, "phases", phases)
        if self.alphabet is None:
            object.__setattr__(self, "alphabet", frozenset().union(*(p.state for p in phases)))
        else:
            object.__setattr__(self, "alphabet", frozenset(self.alphabet))
        for a, b in zip(phases, phases[1:]):
            if a.interval.hi != b.interval.lo or a.interval.hi_closed == b.interval.lo_closed:
                raise ValueError(f"intervals {a.interval} and {b.interval} are not adjacent")

    def __len__(self):
        return len(self.phases)

    def __iter__(self) -> Iterator[Phase]:
        return iter(self.phases)

    def __getitem__(self, i):
        return self.phases[i]

    @property
    def start(self):
        return self.phases[0].interval.lo if self.phases else 0

    @property
    def end(self):
        return self.phases[-1].interval.hi if self.phases else 0

    @property
    def end_closed(self) -> bool:
        return self.phases[-1].interval.hi_closed if self.phases else False

    def state_at(self, t) -> frozenset:
        for p in self.phases:
            if p.interval.contains(t):
                return p.state
        raise ValueError(f"time {t} not covered")

    def breakpoints(self) -> list:
        pts = []
        for p in self.phases:
            for x in (p.interval.lo, p.interval.hi):
                if not pts or pts[-1] != x:
                    pts.append(x)
        return pts

    def fused(self) -> "TimedStateSequence":
        out: list[Phase] = []
        for p in self.phases:
            if out and out[-1].state == p.state:
                q = out[-1].interval
                out[-1] = Phase(p.state, Interval(q.lo, p.interval.hi, q.lo_closed, p.interval.hi_closed))
            else:
                out.append(p)
        return TimedStateSequence(tuple(out), self.alphabet)

    def shifted(self, dt) -> "TimedStateSequence":
        return TimedStateSequence(tuple(Phase(p.state, Interval(p.interval.lo + dt, p.interval.hi + dt,
                                                                p.interval.lo_closed, p.interval.hi_closed))
                                        for p in self.phases), self.alphabet)

    def truncated(self, t) -> "TimedStateSequence":
        """Restrict to times ``<= t``."""
        out = []
        for p in self.phases:
            iv = p.interval
            if iv.lo > t or (iv.lo == t and not iv.lo_closed):
                break
            if iv.hi > t:
                iv = Interval(iv.lo, t, iv.lo_closed, True)
            out.append(Phase(p.state, iv))
        return TimedStateSequence(tuple(out), self.alphabet)

    def restricted(self, props: Iterable) -> "TimedStateSequence":
        props = frozenset(props)
        return TimedStateSequence(tuple(Phase(p.state & props, p.interval) for p in self.phases),
                                  self.alphabet & props).fused()

    def slots(self) -> list[tuple[frozenset, Interval]]:
        """Refinement into alternating point and open slots."""
        out = []
        for p in self.phases:
            iv = p.interval
            if iv.is_point:
                out.append((p.state, iv))
                continue
            if iv.lo_closed:
                out.append((p.state, Interval.point(iv.lo)))
            out.append((p.state, Interval.open(iv.lo, iv.hi)))
            if iv.hi_closed:
                out.append((p.state, Interval.point(iv.hi)))
        return out

    def __str__(self):
        return "<" + ", ".join(f"({{{','.join(sorted(p.state))}}},{p.interval})" for p in self.phases) + ">"

    def to_text(self) -> str:
        lines = [f"alphabet {' '.join(sorted(self.alphabet))}"]
        lines += [f"{p.interval} {' '.join(sorted(p.state))}".rstrip() for p in self.phases]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TimedStateSequence":
        alphabet = None
        phases = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("alphabet"):
                alphabet = frozenset(line.split()[1:])
                continue
            m = _PHASE_RE.match(line)
            if not m:
                raise ValueError(f"cannot parse phase line {raw!r}")
            lo_b, lo, hi, hi_b, rest = m.groups()
            iv = Interval(_parse_num(lo), _parse_num(hi), lo_b == "[", hi_b == "]")
            props = frozenset(x for x in re.split(r"[\s,{}]+", rest) if x)
            phases.append(Phase(props, iv))
        return cls(tuple(phases), alphabet)


_PHASE_RE = re.compile(r"^([\[(])\s*([^,\s]+)\s*,\s*([^\])\s]+)\s*([\])])\s*(.*)$")


def _parse_num(s: str):
    f = Fraction(s)
    return int(f) if f.denominator == 1 else f


def seq(*phases, alphabet=None) -> TimedStateSequence:
    """Shorthand: ``seq(({"p"}, "[0,0]"), ({"q"}, "(0,5)"))``."""
    out = []
    for state, iv in phases:
        if isinstance(iv, str):
            m = _PHASE_RE.match(iv.strip())
            lo_b, lo, hi, hi_b, _ = m.groups()
            iv = Interval(_parse_num(lo), _parse_num(hi), lo_b == "[", hi_b == "]")
        out.append(Phase(frozenset(state), iv))
    return TimedStateSequence(tuple(out), alphabet)
