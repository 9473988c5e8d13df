import math

import pytest

from motorway_enforce.mlsls import (And, Cl, Exists, Free, GapConstraint, HChop, LengthCmp, MlslsSyntaxError, Re,
                                    Scope, Somewhere, UnboundVariable, View, evaluate, gap_constraint_of,
                                    parse_mlsls, pretty, trace_states)
from motorway_enforce.traffic import SetAcc, TimedWord, snapshot

ANTE = "somewhere(<re(A) ~ (free & l=21) ~ re(B)>)"


def test_parse_gap_antecedent():
    f = parse_mlsls(ANTE)
    assert f == Somewhere(HChop(Re("A"), HChop(And(Free(), LengthCmp("=", 21)), Re("B"))))


def test_parse_misc():
    assert parse_mlsls("free") == Free()
    f = parse_mlsls("scope{A}: exists c. cl(c)")
    assert f == Scope(("A",), Exists("c", Cl("c")))
    assert parse_mlsls(pretty(f)) == f
    g = parse_mlsls("!free & re(A) | cl(B)")
    assert parse_mlsls(pretty(g)) == g


def test_syntax_error_position():
    with pytest.raises(MlslsSyntaxError) as e:
        parse_mlsls("re(A) & & free")
    assert e.value.pos == 8


def test_evaluate_gap(two_car_snapshot, geom):
    assert evaluate(two_car_snapshot, parse_mlsls(ANTE), geom)
    assert not evaluate(two_car_snapshot, parse_mlsls(ANTE.replace("21", "15")), geom)


def test_free_inside_reservation(two_car_snapshot, geom):
    assert not evaluate(two_car_snapshot, Free(), geom, view=View((1, 1), (1.0, 2.0)))
    assert evaluate(two_car_snapshot, Free(), geom, view=View((1, 1), (10.0, 20.0)))


def test_unbound_variable(two_car_snapshot, geom):
    with pytest.raises(UnboundVariable):
        evaluate(two_car_snapshot, parse_mlsls("re(c)"), geom)
    assert evaluate(two_car_snapshot, parse_mlsls("somewhere(exists c. re(c))"), geom)


def test_vchop_two_lanes(geom):
    ts = snapshot({"A": {"pos": 0, "res": (1,)}, "B": {"pos": 0, "res": (2,)}}, lane_count=2)
    assert evaluate(ts, parse_mlsls("somewhere([re(A) / re(B)])"), geom)
    assert not evaluate(ts, parse_mlsls("somewhere([re(B) / re(A)])"), geom)


def test_gap_constraint_of():
    g = gap_constraint_of(parse_mlsls("somewhere(<re(A) ~ (free & l>15 & l<=21) ~ re(B)>)"))
    assert g == GapConstraint("A", "B", 15, 21, False, True)
    assert gap_constraint_of(parse_mlsls("free")) is None
    assert gap_constraint_of(parse_mlsls("somewhere(<re(A) ~ re(B)>)")) is None


def test_gap_constraint_algebra():
    g = GapConstraint("A", "B", 15, 21, False, True)
    assert g.holds(21) and not g.holds(15)
    lo, hi = g.complement()
    assert lo == GapConstraint("A", "B", -math.inf, 15, True, True)
    assert hi == GapConstraint("A", "B", 21, math.inf, False, True)
    assert g.intersect(GapConstraint("A", "B", 15, 15)).is_empty()
    assert not g.intersect(GapConstraint("A", "B", 10, 16)).is_empty()


def test_trace_states_example(two_car_snapshot, geom, gap_atlas):
    w = TimedWord(((SetAcc("A", 0.48), 0),))
    m = trace_states(two_car_snapshot, w, gap_atlas, 5, geom)
    assert str(m) == "<({P21,Pin},[0,0]), ({Pin},(0,5)), ({P15},[5,5])>"


def test_trace_states_constant(two_car_snapshot, geom, gap_atlas):
    m = trace_states(two_car_snapshot, TimedWord(), gap_atlas, 9, geom)
    assert len(m) == 1 and m.phases[0].state == {"P21", "Pin"}


def test_trace_states_crossing(geom, gap_atlas):
    ts = snapshot({"A": {"pos": 0, "spd": 4}, "B": {"pos": 25, "spd": 4, "acc": -1}})
    m = trace_states(ts, TimedWord(), gap_atlas, 4, geom)
    # 21 - t^2/2 = 15 at t = sqrt(12)
    cross = [p for p in m.phases if p.interval.is_point and p.state == {"P15"}]
    assert len(cross) == 1
    assert cross[0].interval.lo == pytest.approx(math.sqrt(12), abs=1e-12)
    assert [p.state for p in m.phases] == [{"P21", "Pin"}, {"Pin"}, {"P15"}, set()]


def test_atlas_must_be_ground(two_car_snapshot, geom):
    from motorway_enforce.mlsls import PropositionAtlas
    atlas = PropositionAtlas.from_texts({"X": "somewhere(re(c))"})
    with pytest.raises(ValueError):
        trace_states(two_car_snapshot, TimedWord(), atlas, 1, geom)
