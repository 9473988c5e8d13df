"""Finite-prefix evaluation of SCL formulae on timed state sequences."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

from ..sequence import Interval, Phase, TimedStateSequence
from . import formula as F
from .automaton import compile
from .regions import RegionAutomaton, Tracker, _unit_plan, mark_bad, regionize

SNAP = 1e-6
MAX_SCALE = 64


def to_fraction(x) -> Fraction:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    f = Fraction(x).limit_denominator(MAX_SCALE)
    if abs(float(f) - x) > SNAP:
        raise ValueError(f"breakpoint {x!r} is not a rational with denominator <= {MAX_SCALE}")
    return f


def time_scale(m: TimedStateSequence) -> int:
    """Least integer making every breakpoint of ``m`` integral."""
    return math.lcm(1, *(to_fraction(x).denominator for x in m.breakpoints()))


def rescale(m: TimedStateSequence, k: int) -> TimedStateSequence:
    phases = []
    for p in m.phases:
        iv = p.interval
        lo, hi = to_fraction(iv.lo) * k, to_fraction(iv.hi) * k
        phases.append(Phase(p.state, Interval(_int(lo), _int(hi), iv.lo_closed, iv.hi_closed)))
    return TimedStateSequence(tuple(phases), m.alphabet)


def _int(x: Fraction):
    return int(x) if x.denominator == 1 else x


@lru_cache(maxsize=64)
def automaton_for(psi: F.SclFormula, scale: int = 1) -> RegionAutomaton:
    """Bad-marked region automaton of ``psi`` with time measured in 1/scale units."""
    r = mark_bad(regionize(compile(F.scaled(psi, scale)), scale=scale))
    return r


def eval_finite(m: TimedStateSequence, psi: F.SclFormula, t=None, *, resolution: int = 1) -> bool:
    """Whether ``m`` (cut at ``t``) extends to an infinite model of ``psi``.

    Propositions of ``psi`` outside ``m.alphabet`` are unknown; the verdict is
    true only if it holds for every completion of them (with changes at
    grid points), so adding information never turns true into false.
    The grid is 1/k for k the least common multiple of ``resolution`` and
    the denominators of the breakpoints of ``m``.
    """
    if t is not None and m.phases and t < m.end:
        m = m.truncated(t)
    k = math.lcm(resolution, time_scale(m))
    r = automaton_for(psi, k)
    ms = rescale(m, k) if k != 1 else m
    unknown = sorted(F.props(psi) - ms.alphabet)
    if not ms.phases:
        return any(i not in r.bad for i in r.initial)
    tr = Tracker(r, ms.alphabet | frozenset(unknown))
    p0, steps, _ = _unit_plan(ms)
    choices = [frozenset(c for c, b in zip(unknown, bits) if b)
               for bits in itertools.product((False, True), repeat=len(unknown))]

    @lru_cache(maxsize=None)
    def all_good(n: int, cur: frozenset) -> bool:
        if n == len(steps):
            return any(i not in r.bad for i in cur)
        lab_o, lab_p = steps[n]
        for co in choices:
            for cp in (choices if lab_p is not None else [None]):
                nxt = tr.step(cur, lab_o | co, None if lab_p is None else lab_p | cp)
                if not all_good(n + 1, nxt):
                    return False
        return True

    return all(all_good(0, tr.start(p0 | c)) for c in choices)
