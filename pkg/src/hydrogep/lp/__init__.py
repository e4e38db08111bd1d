"""Linear and mixed-binary programming primitives used by every solver path."""

from .bnb import solve_milp
from .lpfile import dump_lp
from .model import (
    DEFAULT_CONFIG, EQ, GE, LE, INFEASIBLE, OPTIMAL, UNBOUNDED,
    Basis, DimensionError, LpError, LpInstance, LpSolution, MilpInstance,
    MilpSolution, NumericalError, SolverConfig, build_instance, extend_basis,
    remap_basis,
)
from .quadratic import apply_separable_quadratic
from .simplex import solve_lp

__all__ = [
    "DEFAULT_CONFIG", "EQ", "GE", "LE", "INFEASIBLE", "OPTIMAL", "UNBOUNDED",
    "Basis", "DimensionError", "LpError", "LpInstance", "LpSolution",
    "MilpInstance", "MilpSolution", "NumericalError", "SolverConfig",
    "apply_separable_quadratic", "build_instance", "dump_lp", "extend_basis",
    "remap_basis", "solve_lp", "solve_milp",
]
