import random

import pytest

from motorway_enforce.scl import And, Next, Not, Or, Prop, SclSyntaxError, Until, parse_scl
from motorway_enforce.scl.formula import max_constant, pretty, props, random_formula, scaled, subformulas


def test_running_example_skeleton():
    f = parse_scl("P21 -> next[=5] P15", ["P21", "P15"])
    assert f == Or(Not(Prop("P21")), Next("=", 5, Prop("P15")))
    assert props(f) == {"P21", "P15"}
    assert max_constant(f) == 5


def test_tautology_and_until():
    assert parse_scl("p | !p") == Or(Prop("p"), Not(Prop("p")))
    assert parse_scl("next[<3] (a U b)") == Next("<", 3, Until(Prop("a"), Prop("b")))


def test_round_trip_random():
    rng = random.Random(11)
    for _ in range(200):
        f = random_formula(rng, ["p", "q"], depth=4)
        assert parse_scl(pretty(f)) == f


@pytest.mark.parametrize("text", ["next[<x] p", "next[<-1] p", "p &", "(p", "next[<2.5] p", "p U"])
def test_syntax_errors(text):
    with pytest.raises(SclSyntaxError):
        parse_scl(text)


def test_unknown_proposition():
    with pytest.raises(SclSyntaxError):
        parse_scl("p & q", ["p"])


def test_scaled_and_subformulas():
    f = parse_scl("next[<=2] (p & last[>1] q)")
    g = scaled(f, 3)
    assert max_constant(g) == 6
    assert And(Prop("p"), parse_scl("last[>3] q")) in subformulas(g)
