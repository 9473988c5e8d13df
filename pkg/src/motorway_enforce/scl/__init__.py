"""State-clock logic: formulae, automata, regions and finite evaluation."""

from .automaton import ClockLiteral, Location, ScAutomaton, compile, parse_automaton, parse_literal
from .finite import automaton_for, eval_finite, rescale, time_scale
from .formula import (And, FalseS, Implies, Last, Next, Not, Or, Prop, SclFormula, SclSyntaxError, Since,
                      TrueS, Until, parse_scl)
from .regions import (RegionAutomaton, RegionCapError, RegionSequence, accepting_lasso, candidate_sequences,
                      mark_bad, regionize, to_state_sequence, track)

__all__ = [
    "And", "ClockLiteral", "FalseS", "Implies", "Last", "Location", "Next", "Not", "Or", "Prop",
    "RegionAutomaton", "RegionCapError", "RegionSequence", "ScAutomaton", "SclFormula", "SclSyntaxError",
    "Since", "TrueS", "Until", "accepting_lasso", "automaton_for", "candidate_sequences", "compile",
    "eval_finite", "mark_bad", "parse_automaton", "parse_literal", "parse_scl", "regionize", "rescale",
    "time_scale", "to_state_sequence", "track",
]
