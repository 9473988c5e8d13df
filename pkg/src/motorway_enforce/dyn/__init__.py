"""Acceleration planning against timed gap constraints."""

from .model import (CheckReport, DynSpec, DynSystem, Phase, PiecewisePlan, Violation, car_state, check_plan,
                    gap_at, gap_atom)
from .solver import (Decision, OutcomeBox, SolveResult, decide_acceleration, kinematic_infeasibility,
                     max_extension, max_outcome_pos, max_outcome_spd, outcome_box, solve)

__all__ = [
    "CheckReport", "Decision", "DynSpec", "DynSystem", "OutcomeBox", "Phase", "PiecewisePlan", "SolveResult",
    "Violation", "car_state", "check_plan", "decide_acceleration", "gap_at", "gap_atom",
    "kinematic_infeasibility", "max_extension", "max_outcome_pos", "max_outcome_spd", "outcome_box", "solve",
]
