import pytest

from motorway_enforce.enforcement import (Announce, Com, InconsistentCombination, ProtocolError, Receive, Rsu, Send,
                                          SpanMismatch, Step, Tick, CarController, combine, combine_all,
                                          controller_step, discrete_actions, dyn_branches, fallback_check,
                                          rsu_step, run_episode)
from motorway_enforce.formats import parse_scenario
from motorway_enforce.mlsls import PropositionAtlas
from motorway_enforce.scl import RegionCapError
from motorway_enforce.sequence import seq
from motorway_enforce.traffic import Claim, SetAcc, TimedWord, WithdrawClaim, snapshot

from conftest import DATA


def scenario(name):
    return parse_scenario((DATA / name).read_text())


@pytest.fixture(scope="module")
def catch_up_episode():
    return run_episode(scenario("catch_up.scn"))


# -- combining -------------------------------------------------------------

def test_combine_refines_breakpoints():
    a = seq(({"p"}, "[0,2]"), alphabet={"p"})
    b = seq(({"q"}, "[0,1]"), ({"r"}, "(1,2]"), alphabet={"q", "r"})
    c = combine(a, b)
    assert str(c) == "<({p,q},[0,1]), ({p,r},(1,2])>"
    assert combine(b, a) == c


def test_combine_idempotent(m_good):
    assert combine(m_good, m_good) == m_good.fused()


def test_combine_reads_absence_as_negation():
    a = seq(({"p"}, "[0,1]"), alphabet={"p"})
    b = seq((set(), "[0,1]"), alphabet={"p"})
    atlas = PropositionAtlas.from_texts({"p": "somewhere(cl(A))"})
    with pytest.raises(InconsistentCombination):
        combine(a, b, atlas)


def test_combine_negated_atlas_ids():
    atlas = PropositionAtlas.from_texts({"c": "somewhere(cl(A))", "nc": "!somewhere(cl(A))"})
    a = seq(({"c"}, "[0,1]"), alphabet={"c"})
    b = seq(({"nc"}, "[0,1]"), alphabet={"nc"})
    with pytest.raises(InconsistentCombination):
        combine(a, b, atlas)
    ok = combine(a, seq((set(), "[0,1]"), alphabet={"nc"}), atlas)
    assert ok.phases[0].state == {"c"}


def test_combine_span_mismatch():
    with pytest.raises(SpanMismatch):
        combine(seq(({"p"}, "[0,1]")), seq(({"p"}, "[0,2]")))
    with pytest.raises(SpanMismatch):
        combine(seq(({"p"}, "[0,1]")), seq(({"p"}, "[0,1)")))


def test_combine_all_drops_inconsistent_pairs():
    atlas = PropositionAtlas.from_texts({"c": "somewhere(cl(A))", "d": "somewhere(cl(B))"})
    ma = [seq(({"c"}, "[0,1]"), alphabet={"c"}), seq((set(), "[0,1]"), alphabet={"c"})]
    mb = [seq(({"c", "d"}, "[0,1]"), alphabet={"c", "d"}), seq(({"d", "e"}, "[0,1]"), alphabet={"d", "e"})]
    out = combine_all({"A": ma, "B": mb}, atlas)
    assert len(out) == 3
    assert [len(m.phases) for m in out] == sorted(len(m.phases) for m in out)
    with pytest.raises(ValueError):
        combine_all({"A": ma, "B": []}, atlas)
    with pytest.raises(RegionCapError):
        combine_all({"A": ma, "B": mb}, atlas, cap=3)


# -- translation -----------------------------------------------------------

def test_dyn_branches_of_example(gap_atlas, m_good):
    branches = dyn_branches(m_good.truncated(5), gap_atlas)
    assert branches
    first = branches[0]
    assert len(first) == 3 and first[0].interval.lo == 0
    g0 = {g.pair: g for g in first[0].theta}[("A", "B")]
    assert g0.lo == g0.hi == 21
    g2 = {g.pair: g for g in first[2].theta}[("A", "B")]
    assert g2.lo == g2.hi == 15


def test_dyn_branches_prune_jumps(gap_atlas):
    m = seq(({"P21"}, "[0,1)"), ({"P15"}, "[1,2]"), alphabet={"P21", "P15"})
    assert dyn_branches(m, gap_atlas) == []


def test_discrete_claim_actions(geom):
    ts = snapshot({"A": {"pos": 0, "spd": 4}, "B": {"pos": 25, "spd": 4}}, lane_count=2)
    atlas = PropositionAtlas.from_texts({"c": "somewhere(cl(A))"})
    m = seq((set(), "[0,1)"), ({"c"}, "[1,2)"), (set(), "[2,3]"), alphabet={"c"})
    assert discrete_actions(m, atlas, ts, geom) == [(Claim("A", 2), 1.0), (WithdrawClaim("A"), 2.0)]
    late = seq((set(), "[0,1]"), ({"c"}, "(1,3]"), alphabet={"c"})
    assert discrete_actions(late, atlas, ts, geom) is None


# -- state machines --------------------------------------------------------

def test_controller_edges():
    sc = scenario("catch_up.scn")
    c = CarController.start("A", sc.specs["A"], sc)
    assert c.state == "q0" and c.region
    c, out, edge = controller_step(c, Announce(0.0), sc)
    assert c.state == "q1" and isinstance(out[0], Send) and out[0].plans
    assert edge.startswith("q0->q1")
    w = TimedWord(((SetAcc("A", 0.48), 0.0),))
    c, _, _ = controller_step(c, Receive("A", w), sc)
    assert c.state == "q2"
    with pytest.raises(ProtocolError):
        controller_step(c, Announce(0.0), sc)
    c, out, _ = controller_step(c, Tick(0.0), sc)
    assert out == [Com("A", SetAcc("A", 0.48), 0.0)]
    c, out, edge = controller_step(c, Tick(0.0), sc)
    assert c.state == "q3" and edge == "q2->q3 is_empty"


def test_receive_rejects_foreign_actions():
    with pytest.raises(ValueError):
        Receive("A", TimedWord(((SetAcc("B", 1), 0.0),)))


def test_rsu_waits_for_all_cars():
    sc = scenario("catch_up.scn")
    rsu = Rsu(("A",))
    with pytest.raises(ProtocolError):
        rsu_step(rsu, Step("combine"), sc)
    with pytest.raises(ProtocolError):
        rsu_step(rsu, Step("solve"), sc)


# -- episodes --------------------------------------------------------------

def test_example_episode_enforced(catch_up_episode):
    r = catch_up_episode
    assert r.verdict == "Enforced" and r.satisfied == {"A": True}
    assert r.controllers == {"A": "q3"} and r.rsu_state == "p4"
    assert r.final.pos["B"] - r.final.pos["A"] - 4 == pytest.approx(15, abs=1e-6)


def test_episode_is_deterministic(catch_up_episode):
    assert run_episode(scenario("catch_up.scn")).trace == catch_up_episode.trace


def test_deadline_too_close_falls_back():
    r = run_episode(scenario("deadline.scn"))
    assert r.verdict == "Infeasible" and r.rsu_state == "p3"
    assert r.omega is None and not r.executed.entries
    assert r.fallback_ok is True


def test_trivial_spec():
    r = run_episode(scenario("trivial.scn"))
    assert r.verdict == "Enforced" and not r.omega.entries


def test_fallback_pairs(two_car_snapshot, geom):
    (p,) = fallback_check(two_car_snapshot, geom)
    assert (p.rear, p.front, p.gap) == ("A", "B", 21) and p.ok
