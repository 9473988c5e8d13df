import numpy as np
import pytest

from motorway_enforce.dyn import check_plan, gap_at
from motorway_enforce.dyn.oracle import grid_oracle
from motorway_enforce.formats import parse_dyn

from conftest import DATA
from dyn_instances import random_instance


def test_example_found_on_grid():
    spec = parse_dyn((DATA / "catch_up.dyn").read_text())
    # 0.48 is off the 0.25 grid, but a single split reaches 15 exactly
    r = grid_oracle(spec, max_splits=1)
    assert r.feasible and r.plan.splits == (1.0,) and r.plan.acc["A"] == (0.0, 0.75)
    assert check_plan(r.plan, spec).ok
    assert gap_at(spec, r.plan, "A", "B", 5)[0] == pytest.approx(15)


def test_free_spec_first_candidate():
    r = grid_oracle(parse_dyn((DATA / "free.dyn").read_text()), max_splits=0)
    assert r.feasible and r.plan.n == 0


def test_limit_guard():
    spec = parse_dyn((DATA / "catch_up.dyn").read_text())
    with pytest.raises(RuntimeError):
        grid_oracle(spec, max_splits=1, limit=10)


def test_plans_on_grid():
    found = 0
    for seed in range(10):
        r = grid_oracle(random_instance(np.random.default_rng(seed)))
        if r.feasible:
            found += 1
            for acc in r.plan.acc.values():
                assert all(abs(a * 4 - round(a * 4)) < 1e-12 for a in acc)
            assert all(abs(s * 4 - round(s * 4)) < 1e-12 for s in r.plan.splits)
    assert found
