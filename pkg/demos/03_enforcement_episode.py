"""
One enforcement round
=====================

Car A announces the futures its specification allows, the road-side unit
finds one it can drive and sends A its accelerations.  A second scenario
asks for the impossible and ends in the braking-distance fallback.
"""

from pathlib import Path

from motorway_enforce.formats import parse_scenario
from motorway_enforce.enforcement import run_episode

DATA = Path(__file__).parent / "data"

res = run_episode(parse_scenario((DATA / "catch_up.scn").read_text()))
for line in res.trace:
    print(line)
print(res.verdict, res.omega)

res = run_episode(parse_scenario((DATA / "deadline.scn").read_text()))
print(res.trace[-1])
print(res.verdict, "fallback ok:", res.fallback_ok)
