"""Acceptance criteria 1-8; each test prints one PASS/FAIL line."""

import random
import time
from fractions import Fraction

import numpy as np
import pytest

from motorway_enforce.dyn import (DynSystem, PiecewisePlan, car_state, check_plan, decide_acceleration, gap_at,
                                  max_extension, max_outcome_pos, max_outcome_spd)
from motorway_enforce.dyn.oracle import grid_oracle
from motorway_enforce.enforcement import InconsistentCombination, combine, run_episode
from motorway_enforce.formats import parse_dyn, parse_scenario
from motorway_enforce.scl import compile, eval_finite, mark_bad, parse_scl, regionize
from motorway_enforce.scl.formula import random_formula
from motorway_enforce.scl.semantics import bruteforce_satisfiable
from motorway_enforce.sequence import Interval, Phase, TimedStateSequence
from motorway_enforce.traffic import pass_time, run_word, snapshot

from conftest import DATA
from dyn_instances import random_instance
from test_dyn_solver import SHORT

PHI1 = parse_scl("P21 -> next[=5] P15")


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return emit


def _dense_ok(spec, plan, points=1000, tol=1e-9):
    for ph in spec.phases:
        iv = ph.interval
        lo, hi = float(iv.lo), float(iv.hi)
        ts = np.linspace(lo, hi, points)
        keep = np.array([iv.contains(t) for t in ts]) if lo < hi else np.ones(1, bool)
        ts = ts[keep] if lo < hi else np.array([lo])
        for g in ph.theta:
            v = gap_at(spec, plan, g.rear, g.front, ts)
            if np.any(v < g.lo - tol) or np.any(v > g.hi + tol):
                return False
    for c in spec.controlled:
        _, spd = car_state(spec, plan, c, np.linspace(0, spec.horizon, points))
        if np.any(spd < spec.bounds.spd_min - tol) or np.any(spd > spec.bounds.spd_max + tol):
            return False
    return True


def test_criterion_1_gap_target(report):
    spec = parse_dyn((DATA / "catch_up.dyn").read_text())
    start = time.perf_counter()
    d1 = decide_acceleration(spec, n=1)
    d2 = decide_acceleration(spec, n=2)
    elapsed = time.perf_counter() - start
    checks = {"n=1 infeasible": d1.status == "infeasible", "n=2 feasible": d2.feasible,
              "runtime <= 10 s": elapsed <= 10}
    if d2.feasible:
        ts0 = snapshot({c: {"pos": spec.pos0[c], "spd": spec.spd0[c]} for c in spec.cars})
        evo = run_word(ts0, d2.word, 5)
        g5 = evo.final.pos["B"] - evo.final.pos["A"] - 4
        spd = [evo.at(t).spd["A"] for t in np.linspace(0, 5, 1001)]
        checks["simulated gap(5) = 15"] = abs(g5 - 15) <= 1e-6
        checks["speed of A in [0, 13]"] = min(spd) >= -1e-9 and max(spd) <= 13 + 1e-9
    witness = PiecewisePlan((4.0,), {"A": (0.75, -6.0)}, 5)
    rep = check_plan(witness, spec)
    checks["witness gap(5) = 15"] = abs(gap_at(spec, witness, "A", "B", 5)[0] - 15) <= 1e-9
    checks["witness passes check_plan"] = rep.ok
    failed = [k for k, v in checks.items() if not v]
    detail = (f"n=1 -> {d1.status}, n=2 -> {d2.status}, {elapsed:.1f} s; witness: "
              f"{rep.first if rep.first else 'ok'}; failed: {', '.join(failed) or 'none'}")
    report(1, not failed, detail)


def test_criterion_2_deadline_sequences(report, m_good, m_late):
    a, b = eval_finite(m_good, PHI1, 7), eval_finite(m_late, PHI1, 7)
    report(2, a and not b, f"m -> {a}, m' -> {b}")


def test_criterion_3_region_oracle(report):
    rng = random.Random(0)
    bad = []
    n = 50
    for _ in range(n):
        psi = random_formula(rng, ["p", "q"], max_const=3)
        empty = mark_bad(regionize(compile(psi))).is_empty()
        if empty == bruteforce_satisfiable(psi, horizon=5):
            bad.append(str(psi))
    report(3, not bad, f"{n} formulas, {len(bad)} disagreements {bad[:3]}")


def _rand_seq(rng, alphabet, T=3):
    pts = sorted(rng.sample([Fraction(k, 2) for k in range(1, 2 * T)], rng.randint(0, 2)))
    cuts = [Fraction(0)] + pts + [Fraction(T)]
    slots = []
    for i, p in enumerate(cuts):
        if i:
            slots.append(Interval(cuts[i - 1], p, False, False))
        slots.append(Interval.point(p))
    phases = [Phase(frozenset(x for x in alphabet if rng.random() < 0.5), iv) for iv in slots]
    return TimedStateSequence(tuple(phases), frozenset(alphabet)).fused()


def test_criterion_4_combination(report):
    rng = random.Random(4)
    valid = premise = 0
    bad = []
    while valid < 200:
        m1 = _rand_seq(rng, rng.sample("pqr", rng.randint(1, 2)))
        m2 = _rand_seq(rng, rng.sample("pqr", rng.randint(1, 2)))
        try:
            c = combine(m1, m2)
        except InconsistentCombination:
            continue
        valid += 1
        psi = random_formula(rng, "pqr", depth=3, max_const=2)
        t = Fraction(rng.randint(0, 6), 2)
        if eval_finite(m1, psi, t, resolution=2) or eval_finite(m2, psi, t, resolution=2):
            premise += 1
            if not eval_finite(c, psi, t, resolution=2):
                bad.append((str(m1), str(m2), str(psi), t))
    report(4, not bad, f"{valid} pairs, premise held {premise} times, {len(bad)} counterexamples")


def test_criterion_5_solver_oracle(report):
    rng = np.random.default_rng(5)
    n = 20
    missed, unverified, feasible = [], [], 0
    for i in range(n):
        spec = random_instance(rng)
        o = grid_oracle(spec)
        d = decide_acceleration(spec)
        feasible += o.feasible
        if o.feasible and not d.feasible:
            missed.append(i)
        if d.feasible and not (check_plan(d.plan, spec).ok and _dense_ok(spec, d.plan)):
            unverified.append(i)
    report(5, not missed and not unverified,
           f"{n} instances, oracle feasible {feasible}, missed {missed}, unverified plans {unverified}")


def _corpus():
    specs = [parse_dyn((DATA / f).read_text()) for f in ("catch_up.dyn", "catch_up_hold.dyn", "free.dyn")]
    specs.append(parse_dyn(SHORT))
    rng = np.random.default_rng(6)
    specs += [random_instance(rng) for _ in range(6)]
    return specs


def _within(inner, outer, eps=1e-7):
    if inner is None:
        return True
    return outer is not None and outer[0] <= inner[0] + eps and inner[1] <= outer[1] + eps


def test_criterion_6_monotonicity(report):
    broken, worst = [], 0
    for k, spec in enumerate(_corpus()):
        for relaxed in (True, False):
            prev = None
            for n in range(3):
                sys_ = DynSystem(spec, n, relaxed)
                cur = (max_extension(sys_), max_outcome_pos(sys_), max_outcome_spd(sys_))
                if prev is not None:
                    if cur[0] < prev[0] - 1e-6:
                        broken.append((k, relaxed, n, "extension"))
                    for key in prev[1]:
                        if not _within(prev[1][key], cur[1][key]):
                            broken.append((k, relaxed, n, f"gap {key}"))
                    for key in prev[2]:
                        if not _within(prev[2][key], cur[2][key]):
                            broken.append((k, relaxed, n, f"speed {key}"))
                prev = cur
        d = decide_acceleration(spec)
        worst = max(worst, d.n)
        if d.status == "indeterminate" or d.n > 8:
            broken.append((k, "stabilization", d.n))
    report(6, not broken, f"{len(_corpus())} specs, n <= 2 checked, largest decided n = {worst}, "
           f"violations {broken[:4]}")


def test_criterion_7_protocol(report):
    sc = parse_scenario((DATA / "catch_up.scn").read_text())
    r1, r2 = run_episode(sc), run_episode(sc)
    bad = parse_scenario((DATA / "deadline.scn").read_text())
    r3 = run_episode(bad)
    checks = {
        "Enforced": r1.verdict == "Enforced",
        "all q3": all(s == "q3" for s in r1.controllers.values()),
        "post-hoc check": bool(r1.satisfied) and all(r1.satisfied.values()),
        "deadline variant in p3": r3.rsu_state == "p3",
        "fallback reported": r3.fallback is not None and any("fallback" in line for line in r3.trace),
        "deterministic": r1.trace == r2.trace,
    }
    failed = [k for k, v in checks.items() if not v]
    report(7, not failed, f"{r1.verdict}/{r3.verdict}, fallback ok={r3.fallback_ok}, failed: {failed or 'none'}")


def test_criterion_8_additivity(report):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(10_000):
        cars = {c: {"pos": float(rng.uniform(0, 500)), "spd": float(rng.uniform(0, 40)),
                    "acc": float(rng.uniform(-10, 5))} for c in ("A", "B")}
        ts = snapshot(cars)
        t1, t2 = rng.uniform(0, 10, 2)
        a = pass_time(pass_time(ts, t1), t2)
        b = pass_time(ts, t1 + t2)
        for c in ("A", "B"):
            worst = max(worst, abs(a.pos[c] - b.pos[c]), abs(a.spd[c] - b.spd[c]))
    report(8, worst <= 1e-9, f"10000 triples, max deviation {worst:.3g}")
