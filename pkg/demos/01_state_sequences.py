"""
Spatial propositions over time
==============================

Two cars share a lane.  A closes in on B; we watch which gap propositions
hold as time passes and ask whether a deadline formula is still satisfiable.
"""

from pathlib import Path

from motorway_enforce.formats import parse_scenario
from motorway_enforce.mlsls import trace_states
from motorway_enforce.scl import compile, eval_finite, mark_bad, parse_scl, regionize
from motorway_enforce.sequence import TimedStateSequence
from motorway_enforce.traffic import SetAcc, TimedWord

DATA = Path(__file__).parent / "data"
sc = parse_scenario((DATA / "catch_up.scn").read_text())
atlas = sc.specs["A"].atlas

# A speeds up a little for five seconds, then matches B again
word = TimedWord(((SetAcc("A", 0.48), 0.0), (SetAcc("A", 0.0), 5.0)))
m = trace_states(sc.snapshot, word, atlas, 7, sc.geometry)
print("observed:", m)

phi = parse_scl("P21 -> next[=5] P15")
r = mark_bad(regionize(compile(phi)))
print(f"region automaton: {len(r.states)} states, {len(r.bad)} bad, empty={r.is_empty()}")

# the same observation with slightly different interval ends
for name in ("m.seq", "m_late.seq"):
    seq_ = TimedStateSequence.from_text((DATA / name).read_text())
    print(f"{name:11s} {seq_}  ->  {eval_finite(seq_, phi, 7)}")
