import pytest

from motorway_enforce.scl import (RegionCapError, accepting_lasso, candidate_sequences, compile, mark_bad,
                                  parse_automaton, parse_scl, regionize, to_state_sequence, track)
from motorway_enforce.sequence import seq

PHI = parse_scl("P21 -> next[=5] P15")


@pytest.fixture(scope="module")
def r_phi():
    return mark_bad(regionize(compile(PHI)))


def test_no_clock_automaton_keeps_locations():
    a = parse_automaton("props p\nloc a props={p} init accept=0\nloc b props={} init\nedge a -> b\nedge b -> a\n")
    r = mark_bad(regionize(a))
    assert {(s[0], s[1]) for s in r.states} == {("P", "a"), ("O", "a"), ("P", "b"), ("O", "b")}
    assert [c.name for c in r.clocks] == ["tick"]
    assert not r.is_empty()


def test_single_history_clock_regions():
    a = parse_automaton("""props p
loc a props={p} init accept=0
loc b props={} delta="x_p<=1" accept=0
loc c props={} delta="!x_p<=1" init accept=0
edge a -> a
edge a -> b
edge b -> b
edge b -> c
edge b -> a
edge c -> c
edge c -> a
""")
    r = regionize(a)
    classes = set()
    for _, _, reg in r.states:
        v = reg[0]
        if v is not None:
            classes.add(v[:2])
    # {0}, (0,1), {1}, (1, inf); a history clock is never exactly 0 since occurrences are strictly past
    assert classes <= {("eq", 0), ("in", 0), ("eq", 1), ("gt",)}
    assert {("in", 0), ("eq", 1), ("gt",)} <= classes
    assert r.clocks[0].cmax == 1


def test_accepting_self_loop_nothing_bad():
    r = mark_bad(regionize(parse_automaton("props\nloc a init accept=0\nedge a -> a\n")))
    assert not r.bad and not r.is_empty()


def test_dead_end_is_bad():
    r = mark_bad(regionize(parse_automaton("props\nloc a init accept=0\nloc b\nedge a -> a\nedge a -> b\n")))
    dead = [i for i, s in enumerate(r.states) if s[1] == "b"]
    assert dead and all(i in r.bad for i in dead)
    assert candidate_sequences(r, dead, 2) == set()


def test_phi_nonempty_with_lasso(r_phi):
    assert not r_phi.is_empty()
    start = min(i for i in r_phi.initial if i not in r_phi.bad)
    stem, cycle = accepting_lasso(r_phi, start)
    assert cycle


def test_track_example(r_phi, m_good, m_late):
    assert track(r_phi, seq(alphabet={"P21"})) == r_phi.initial
    good = track(r_phi, m_good.truncated(5))
    assert good and not (good & r_phi.bad)
    late = track(r_phi, m_late)
    assert not late or late <= r_phi.bad


def test_candidates_contain_example(r_phi):
    cur = track(r_phi, seq(({"P21"}, "[0,0]"), alphabet={"P21", "P15"}))
    cands = {str(to_state_sequence(p)) for p in candidate_sequences(r_phi, cur, 7)}
    # candidates end closed at the horizon
    assert "<({P21},[0,0]), ({},(0,5)), ({P15},[5,7])>" in cands
    assert not any(c.startswith("<({P21},[0,0]), ({},(0,5])") for c in cands)


def test_candidates_short_horizon_deadline():
    r = mark_bad(regionize(compile(parse_scl("p -> next[=2] q"))))
    cur = track(r, seq(({"p"}, "[0,0]"), alphabet={"p", "q"}))
    cands = candidate_sequences(r, cur, 1)
    assert cands
    for pi in cands:
        assert not set(pi.states) & r.bad
        m = to_state_sequence(pi)
        assert m.end == 1 and "p" in m.phases[0].state and m.phases[0].interval.lo == 0
    assert len(cands) == 4


def test_candidate_cap(r_phi):
    cur = track(r_phi, seq(({"P21"}, "[0,0]"), alphabet={"P21", "P15"}))
    with pytest.raises(RegionCapError):
        candidate_sequences(r_phi, cur, 7, cap=5)


def test_exact_deadline_chain(r_phi):
    cur = track(r_phi, seq(({"P21"}, "[0,0]"), alphabet={"P21", "P15"}))
    shapes = set()
    for pi in candidate_sequences(r_phi, cur, 5, max_changes=2):
        m = to_state_sequence(pi)
        shapes.add(tuple(str(p.interval) for p in m.phases))
    assert ("[0,0]", "(0,5)", "[5,5]") in shapes
