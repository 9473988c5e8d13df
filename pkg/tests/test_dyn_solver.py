import numpy as np
import pytest

from motorway_enforce.dyn import (DynSystem, check_plan, decide_acceleration, kinematic_infeasibility, max_extension,
                                  outcome_box, solve)
from motorway_enforce.dyn.oracle import grid_oracle
from motorway_enforce.formats import parse_dyn

from conftest import DATA
from dyn_instances import random_instance

SHORT = """car A pos=0 spd=4 size=4 controllable
car B pos=25 spd=4 size=4
bounds acc=-10,5 spd=0,13
phase [0,0] gap(A,B) = 21
phase (0,1) gap(A,B) in (15,21]
phase [1,1] gap(A,B) = 15
"""


@pytest.fixture(scope="module")
def catch_up():
    return parse_dyn((DATA / "catch_up.dyn").read_text())


@pytest.fixture(scope="module")
def hold():
    return parse_dyn((DATA / "catch_up_hold.dyn").read_text())


def test_free_spec_needs_no_change():
    spec = parse_dyn((DATA / "free.dyn").read_text())
    d = decide_acceleration(spec)
    assert d.feasible and d.n == 0


def test_example_decision(catch_up):
    d = decide_acceleration(catch_up)
    assert d.feasible and d.n <= 1
    assert check_plan(d.plan, catch_up).ok
    assert d.word is not None and len(d.word) >= 1


def test_forced_n(catch_up):
    d = decide_acceleration(catch_up, n=1)
    assert d.feasible and d.n == 1 and d.plan.n == 1


def test_short_horizon_is_proven_infeasible():
    spec = parse_dyn(SHORT)
    reason = kinematic_infeasibility(spec)
    assert reason and "phase 3" in reason
    d = decide_acceleration(spec)
    assert d.status == "infeasible" and d.proven
    assert not grid_oracle(spec).feasible


def test_hold_needs_two_changes(hold):
    assert not solve(DynSystem(hold, 1)).feasible
    r = solve(DynSystem(hold, 2))
    assert r.feasible and check_plan(r.plan, hold).ok


def test_max_extension_of_short_instance():
    spec = parse_dyn(SHORT)
    x = max_extension(DynSystem(spec, 1))
    assert 0 < x < 1
    # the relaxed system ignores the unreachable end point
    assert max_extension(DynSystem(spec, 1, True)) == 1


def test_outcome_box_contains_target(catch_up):
    box = outcome_box(DynSystem(catch_up, 1, True))
    lo, hi = box.pos[("A", "B")]
    assert lo <= 15 <= hi
    assert box.extension == 5
    assert box.close_to(box)


def test_more_splits_never_hurt(catch_up):
    ranges = [outcome_box(DynSystem(catch_up, n, True)).pos[("A", "B")] for n in range(3)]
    for (a0, b0), (a1, b1) in zip(ranges, ranges[1:]):
        assert a1 <= a0 + 1e-9 and b1 >= b0 - 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_agrees_with_grid_oracle(seed):
    spec = random_instance(np.random.default_rng(1000 + seed))
    d = decide_acceleration(spec)
    o = grid_oracle(spec)
    if o.feasible:
        assert d.feasible
    if d.feasible:
        assert check_plan(d.plan, spec).ok
    if d.proven:
        assert not o.feasible
