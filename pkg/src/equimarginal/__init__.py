"""Optimal allocation of a unit budget under diminishing returns a x / (1 + x)."""

from .closed_form import (
    RatioVector,
    active_set_size,
    closed_form_allocation,
    normalized_ratios,
    solve,
    three_cup_solution,
    two_cup_solution,
)
from .model import (
    Allocation,
    DimensionError,
    DomainError,
    KktReport,
    PhysicalInterpretationWarning,
    ProblemInstance,
    SolveResult,
    evaluate_min_form,
    evaluate_objective,
    kkt_check,
    marginal_utilities,
    simulate_mixing,
)
from .oracles import (
    Method,
    OracleResult,
    UnsupportedSizeError,
    cross_validate,
    project_to_simplex,
    solve_by_grid_search,
    solve_by_lambda_bisection,
    solve_by_projected_gradient,
)

__version__ = "0.1.0"
