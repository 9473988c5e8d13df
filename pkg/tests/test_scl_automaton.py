import pytest

from motorway_enforce.scl import ClockLiteral, compile, parse_automaton, parse_literal, parse_scl


def test_atomic():
    a = compile(parse_scl("p"))
    assert a.initial
    assert all("p" in a.by_id[i].label for i in a.initial)


def test_contradiction_has_no_initial_location():
    assert not compile(parse_scl("p & !p")).initial


def test_next_literal_on_initial_locations():
    a = compile(parse_scl("next[=5] p"))
    lits = {str(d) for i in a.initial for d in a.by_id[i].delta}
    assert "y_p=5" in lits
    assert a.clock_bounds() == {"y_p": 5}


def test_compound_argument_gets_auxiliary_key():
    a = compile(parse_scl("next[<2] (p & q)"))
    clocks = set(a.clock_bounds())
    assert len(clocks) == 1 and clocks.pop().startswith("y__")


def test_one_accept_set_per_until():
    assert len(compile(parse_scl("(p U q) & (q U p)")).accept) == 2


def test_text_round_trip():
    a = compile(parse_scl("last[>1] p | next[<=2] q"))
    b = parse_automaton(a.to_text())
    assert b.to_text() == a.to_text()


def test_literals():
    lit = parse_literal("!y_p<=3")
    assert lit == ClockLiteral("y_p", "<=", 3, False)
    assert lit.kind == "prophecy" and lit.key == "p"
    with pytest.raises(ValueError):
        parse_literal("z_p<3")
    with pytest.raises(ValueError):
        ClockLiteral("x_p", "<", -1)


def test_bad_automaton_text():
    with pytest.raises(ValueError):
        parse_automaton("props p\nloc a init\nedge a -> b\n")
