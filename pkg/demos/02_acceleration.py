"""
Choosing accelerations for a gap target
=======================================

The gap has to shrink from 21 to exactly 15 at t = 5 without touching 15
earlier.  We let the solver pick the number of acceleration changes, then
look at a hand-made two-step schedule and at a variant that must hold the gap.
"""

from pathlib import Path

import numpy as np

from motorway_enforce.dyn import DynSystem, PiecewisePlan, check_plan, decide_acceleration, gap_at, solve
from motorway_enforce.formats import parse_dyn

DATA = Path(__file__).parent / "data"
spec = parse_dyn((DATA / "catch_up.dyn").read_text())

d = decide_acceleration(spec)
print(d.status, "with n =", d.n, "->", d.word)
ts = np.linspace(0, 5, 6)
print("gap:", np.round(gap_at(spec, d.plan, "A", "B", ts), 3))

# accelerate hard, then brake: the target is reached at t = 4 already
hand = PiecewisePlan((4.0,), {"A": (0.75, -6.0)}, 5)
print("hand schedule:", check_plan(hand, spec).first)

hold = parse_dyn((DATA / "catch_up_hold.dyn").read_text())
for n in (1, 2):
    r = solve(DynSystem(hold, n))
    print(f"hold until 7 with n={n}: {r.status}")
