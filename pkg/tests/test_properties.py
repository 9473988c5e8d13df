import random
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from motorway_enforce.enforcement import InconsistentCombination, combine
from motorway_enforce.scl import parse_scl
from motorway_enforce.scl.formula import pretty, random_formula
from motorway_enforce.sequence import Interval, Phase, TimedStateSequence
from motorway_enforce.traffic import pass_time, snapshot

finite = st.floats(-100, 100, allow_nan=False)


@st.composite
def sequences(draw, alphabet=("p", "q")):
    alpha = draw(st.sets(st.sampled_from(alphabet), min_size=1))
    pts = sorted(draw(st.sets(st.integers(1, 5), max_size=3)))
    cuts = [0, *(Fraction(k, 2) for k in pts), 3]
    slots = []
    for i, p in enumerate(cuts):
        if i:
            slots.append(Interval(cuts[i - 1], p, False, False))
        slots.append(Interval.point(p))
    phases = [Phase(frozenset(draw(st.sets(st.sampled_from(sorted(alpha))))), iv) for iv in slots]
    return TimedStateSequence(tuple(phases), frozenset(alpha)).fused()


@given(pos=finite, spd=st.floats(0, 40), acc=st.floats(-10, 5), t1=st.floats(0, 10), t2=st.floats(0, 10))
def test_pass_time_composes(pos, spd, acc, t1, t2):
    ts = snapshot({"A": {"pos": pos, "spd": spd, "acc": acc}})
    assert pass_time(pass_time(ts, t1), t2).isclose(pass_time(ts, t1 + t2), 1e-9)


@given(sequences(), sequences())
def test_combine_commutes_and_keeps_states(a, b):
    try:
        c = combine(a, b)
    except InconsistentCombination:
        return
    assert combine(b, a) == c
    for t in (Fraction(k, 4) for k in range(13)):
        s = c.state_at(t)
        assert a.state_at(t) <= s and b.state_at(t) <= s
        assert s <= a.state_at(t) | b.state_at(t)


@given(sequences())
def test_fused_has_no_equal_neighbours(m):
    assert all(x.state != y.state for x, y in zip(m.phases, m.phases[1:]))
    assert m.start == 0 and m.end == 3


@settings(max_examples=60)
@given(st.integers(0, 10_000))
def test_pretty_round_trip(seed):
    f = random_formula(random.Random(seed), ["p", "q"], max_const=3)
    assert parse_scl(pretty(f)) == f
