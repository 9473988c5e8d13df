from fractions import Fraction

import pytest

from motorway_enforce.sequence import Interval, Phase, TimedStateSequence, seq


def test_interval_basics():
    iv = Interval(0, 5, False, True)
    assert str(iv) == "(0,5]"
    assert not iv.contains(0) and iv.contains(5) and iv.contains(2.5)
    assert Interval(0, 7).contains_interval(iv)
    assert not Interval.open(0, 5).contains_interval(iv)
    with pytest.raises(ValueError):
        Interval(1, 1, True, False)
    with pytest.raises(ValueError):
        Interval(2, 1)


def test_adjacency_enforced():
    with pytest.raises(ValueError):
        seq(({"p"}, "[0,1]"), ({"q"}, "[1,2]"))
    with pytest.raises(ValueError):
        seq(({"p"}, "[0,1)"), ({"q"}, "(1,2]"))


def test_text_round_trip(m_good):
    back = TimedStateSequence.from_text(m_good.to_text())
    assert back == m_good
    assert back.alphabet == {"P21", "P15"}


def test_fractional_endpoints():
    m = TimedStateSequence.from_text("[0,1/2] p\n(1/2,1]\n")
    assert m.phases[0].interval.hi == Fraction(1, 2)
    assert m.alphabet == {"p"}


def test_truncated_and_state_at(m_good):
    t = m_good.truncated(5)
    assert str(t) == "<({P21},[0,0]), ({},(0,5)), ({P15},[5,5])>"
    assert m_good.state_at(6) == {"P15"}
    assert m_good.truncated(0).end == 0


def test_fused_and_slots():
    m = TimedStateSequence((Phase(frozenset("p"), Interval(0, 1)), Phase(frozenset("p"), Interval(1, 2, False, True))))
    assert len(m.fused()) == 1
    slots = seq(({"p"}, "[0,2)")).slots()
    assert [str(iv) for _, iv in slots] == ["[0,0]", "(0,2)"]


def test_restricted(m_good):
    r = m_good.restricted({"P15"})
    assert str(r) == "<({},[0,5)), ({P15},[5,7))>"
    assert r.alphabet == {"P15"}
