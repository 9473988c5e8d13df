"""Line-oriented scenario and DYN problem files.

Scenario file::

    lanes 1
    car A pos=0 spd=4 acc=0 res=1 size=4 brake=10
    car B pos=25 spd=4 res=1 size=4 brake=10 uncontrolled
    bounds acc=-10,5 spd=0,13
    horizon 5
    seed 0
    prop A P21 = somewhere(<re(A) ~ (free & l=21) ~ re(B)>)
    spec A = P21 -> next[=5] P15
    external acc(B,1) @ 0

DYN file::

    car A pos=0 spd=4 size=4 controllable
    car B pos=25 spd=4 size=4
    bounds acc=-10,5 spd=0,13
    phase [0,0] gap(A,B) = 21
    phase (0,5) gap(A,B) in (15,21]
    phase [5,5] gap(A,B) = 15 & gap(B,C) >= 2

``#`` starts a comment.  Numbers are decimal.
"""

from __future__ import annotations

import math
import re

from .dyn import DynSpec, Phase, gap_atom
from .enforcement import CarSpec, Scenario
from .mlsls import GapConstraint, PropositionAtlas, parse_mlsls
from .scl import parse_scl
from .sequence import Interval
from .traffic import (CarGeometry, Claim, DynamicBounds, Reserve, RoadConfig, SetAcc, TimedWord, WithdrawClaim,
                      WithdrawReserve, snapshot)


class FormatError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


def _lines(text: str):
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield i, line


def _num(s: str, ln: int) -> float:
    try:
        v = float(s)
    except ValueError:
        raise FormatError(f"not a number: {s!r}", ln) from None
    if math.isnan(v):
        raise FormatError("NaN is not allowed", ln)
    return v


def _kv(tokens, ln):
    out, flags = {}, set()
    for tok in tokens:
        if "=" in tok:
            k, v = tok.split("=", 1)
            out[k] = v
        else:
            flags.add(tok)
    return out, flags


def _pair(s: str, ln: int) -> tuple[float, float]:
    parts = s.split(",")
    if len(parts) != 2:
        raise FormatError(f"expected lo,hi but got {s!r}", ln)
    return _num(parts[0], ln), _num(parts[1], ln)


def _bounds(tokens, ln) -> DynamicBounds:
    kv, _ = _kv(tokens, ln)
    try:
        a_lo, a_hi = _pair(kv["acc"], ln)
        s_lo, s_hi = _pair(kv["spd"], ln)
    except KeyError as exc:
        raise FormatError(f"bounds need {exc.args[0]}=lo,hi", ln) from None
    return DynamicBounds(a_lo, a_hi, s_hi, s_lo)


_IV = re.compile(r"^([\[(])\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*([\])])$")


def parse_interval(s: str, ln: int = 0) -> Interval:
    m = _IV.match(s.strip())
    if not m:
        raise FormatError(f"bad interval {s!r}", ln)
    lo_b, lo, hi, hi_b = m.groups()
    return Interval(_num(lo, ln), _num(hi, ln), lo_b == "[", hi_b == "]")


_GAP = re.compile(r"^gap\(\s*(\w+)\s*,\s*(\w+)\s*\)\s*(?:(in)\s*(.+)|(<=|>=|<|>|=)\s*(\S+))$")


def parse_gap(s: str, ln: int = 0) -> GapConstraint:
    m = _GAP.match(s.strip())
    if not m:
        raise FormatError(f"bad gap constraint {s!r}", ln)
    rear, front, is_in, iv, op, k = m.groups()
    if is_in:
        i = parse_interval(iv, ln)
        return GapConstraint(rear, front, i.lo, i.hi, i.lo_closed, i.hi_closed)
    return gap_atom(rear, front, op, _num(k, ln))


def _car_line(tokens, ln):
    if not tokens:
        raise FormatError("car needs an identifier", ln)
    name = tokens[0]
    kv, flags = _kv(tokens[1:], ln)
    unknown = set(kv) - {"pos", "spd", "acc", "res", "clm", "size", "brake"}
    if unknown:
        raise FormatError(f"unknown car fields {sorted(unknown)}", ln)
    lanes = lambda v: tuple(int(x) for x in v.split(",") if x)  # noqa: E731
    entry = {"pos": _num(kv.get("pos", "0"), ln), "spd": _num(kv.get("spd", "0"), ln),
             "acc": _num(kv.get("acc", "0"), ln), "res": lanes(kv.get("res", "1")), "clm": lanes(kv.get("clm", ""))}
    geom = CarGeometry(_num(kv.get("size", "4"), ln), _num(kv.get("brake", "0"), ln))
    return name, entry, geom, flags


_ACTION = re.compile(r"^(acc|c|wd_c|r|wd_r)\(\s*(\w+)\s*(?:,\s*([-+0-9.eE]+)\s*)?\)\s*@\s*(\S+)$")


def parse_action(s: str, ln: int = 0):
    m = _ACTION.match(s.strip())
    if not m:
        raise FormatError(f"bad timed action {s!r}", ln)
    kind, car, arg, t = m.groups()
    if kind in ("acc", "c", "wd_r") and arg is None:
        raise FormatError(f"{kind} needs an argument", ln)
    act = {"acc": lambda: SetAcc(car, _num(arg, ln)), "c": lambda: Claim(car, int(arg)),
           "wd_c": lambda: WithdrawClaim(car), "r": lambda: Reserve(car),
           "wd_r": lambda: WithdrawReserve(car, int(arg))}[kind]()
    return act, _num(t, ln)


def parse_scenario(text: str) -> Scenario:
    lanes = 1
    cars, geom, flags = {}, {}, {}
    bounds = None
    horizon = None
    seed = 0
    announce = 0.0
    props: dict = {}
    specs: dict = {}
    external = []
    for ln, line in _lines(text):
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if head == "lanes":
                lanes = int(rest)
            elif head == "car":
                name, entry, g, fl = _car_line(rest.split(), ln)
                if name in cars:
                    raise FormatError(f"car {name} defined twice", ln)
                cars[name], geom[name], flags[name] = entry, g, fl
            elif head == "bounds":
                bounds = _bounds(rest.split(), ln)
            elif head == "horizon":
                horizon = _num(rest, ln)
            elif head == "seed":
                seed = int(rest)
            elif head == "announce":
                announce = _num(rest, ln)
            elif head == "prop":
                m = re.match(r"^(\w+)\s+(\w+)\s*=\s*(.+)$", rest)
                if not m:
                    raise FormatError("expected: prop <car> <id> = <formula>", ln)
                props.setdefault(m.group(1), []).append((m.group(2), parse_mlsls(m.group(3))))
            elif head == "spec":
                m = re.match(r"^(\w+)\s*=\s*(.+)$", rest)
                if not m:
                    raise FormatError("expected: spec <car> = <formula>", ln)
                specs[m.group(1)] = (m.group(2), ln)
            elif head == "external":
                external.append(parse_action(rest, ln))
            else:
                raise FormatError(f"unknown section {head!r}", ln)
        except FormatError:
            raise
        except ValueError as exc:
            raise FormatError(str(exc), ln) from exc
    if not cars:
        raise FormatError("no cars")
    if bounds is None or horizon is None:
        raise FormatError("bounds and horizon are required")
    for c in set(props) - set(specs):
        raise FormatError(f"propositions given for car {c} without a spec")
    car_specs = {}
    for c, (text_f, ln) in specs.items():
        if c not in cars:
            raise FormatError(f"spec for unknown car {c}", ln)
        atlas = PropositionAtlas(tuple(props.get(c, ())))
        try:
            car_specs[c] = CarSpec(atlas, parse_scl(text_f, atlas))
        except ValueError as exc:
            raise FormatError(str(exc), ln) from exc
    ts = snapshot(cars, lane_count=lanes)
    return Scenario(RoadConfig(lanes, tuple(cars)), ts, geom, bounds, car_specs, horizon, seed,
                    frozenset(c for c, f in flags.items() if "uncontrolled" in f), TimedWord(tuple(external)),
                    announce)


def parse_dyn(text: str) -> DynSpec:
    pos, spd, acc, sizes, ctrl = {}, {}, {}, {}, set()
    bounds = None
    phases = []
    for ln, line in _lines(text):
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if head == "car":
                name, entry, g, fl = _car_line(rest.split(), ln)
                pos[name], spd[name], acc[name], sizes[name] = entry["pos"], entry["spd"], entry["acc"], g.size
                if "controllable" in fl:
                    ctrl.add(name)
            elif head == "bounds":
                bounds = _bounds(rest.split(), ln)
            elif head == "phase":
                m = re.match(r"^([\[(][^\])]*[\])])\s*(.*)$", rest)
                if not m:
                    raise FormatError("expected: phase <interval> [constraints]", ln)
                iv = parse_interval(m.group(1), ln)
                theta = [parse_gap(x, ln) for x in m.group(2).split("&") if x.strip()]
                phases.append(Phase(theta, iv))
            else:
                raise FormatError(f"unknown section {head!r}", ln)
        except FormatError:
            raise
        except ValueError as exc:
            raise FormatError(str(exc), ln) from exc
    if bounds is None:
        raise FormatError("bounds are required")
    try:
        return DynSpec(tuple(phases), pos, spd, acc, bounds, frozenset(ctrl), sizes)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc

