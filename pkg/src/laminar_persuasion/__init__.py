"""Optimal menus of signals for persuading a privately informed receiver.

Typical use::

    from laminar_persuasion import instances, solve_opt, construct_mechanism
    problem = instances.buyer()
    solution = solve_opt(problem)
    mechanism = construct_mechanism(solution)
"""

from .dist import StateDistribution
from .errors import ConstructionError, ConvergenceError, DomainError, InfeasibleError, ProblemFormatError
from .laminar import (LaminarFamily, Mechanism, construct_block, construct_mechanism, laminar_violations,
                      validate_laminar)
from .model import Problem, StepProfile, derive_step_profile
from .reduced_form import (MenuSolution, SolverConfig, binding_groups, majorization_sweep, posterior_atoms,
                           refine_vertex, solution_from_atoms, solve_opt, solve_public)
from .simplex import BACKEND
from .verify import audit_mechanism, ic_report, monte_carlo_audit, oracle_discrete, reproduce_example

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConstructionError", "ConvergenceError", "DomainError", "InfeasibleError", "LaminarFamily",
    "Mechanism", "MenuSolution", "Problem", "ProblemFormatError", "SolverConfig", "StateDistribution",
    "StepProfile", "audit_mechanism", "binding_groups", "construct_block", "construct_mechanism",
    "derive_step_profile", "ic_report", "laminar_violations", "majorization_sweep", "monte_carlo_audit",
    "oracle_discrete", "posterior_atoms", "refine_vertex", "reproduce_example", "solution_from_atoms",
    "solve_opt", "solve_public", "validate_laminar",
]
