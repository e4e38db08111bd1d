"""Decomposition solvers for the two-stage expansion model."""

from .consensus import ConsensusState, consensus_point, ph_update
from .master import MasterError, MasterProblem, MasterResult, Penalty
from .solvers import (
    CONVERGED, ITERATION_CAP, METHODS, TIME_LIMIT, IterationRecord, SolveOptions,
    SolveReport, consensus_weights, relative_gap, solve, solve_abdmm, solve_bdmm,
    solve_de, solve_tbd,
)
from .subproblem import (
    Cut, CutPool, RecourseError, RecourseEvaluator, ScenarioLp, SubproblemResult,
    evaluate_subproblem, recourse,
)

__all__ = [
    "CONVERGED", "ITERATION_CAP", "METHODS", "TIME_LIMIT", "ConsensusState", "Cut",
    "CutPool", "IterationRecord", "MasterError", "MasterProblem", "MasterResult",
    "Penalty", "RecourseError", "RecourseEvaluator", "ScenarioLp", "SolveOptions",
    "SolveReport", "SubproblemResult", "consensus_point", "consensus_weights",
    "evaluate_subproblem", "ph_update", "recourse", "relative_gap", "solve",
    "solve_abdmm", "solve_bdmm", "solve_de", "solve_tbd",
]
