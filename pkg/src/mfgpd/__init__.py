"""Primal-dual solver and certifier for finite-horizon mean field games.

A model is discretized into a controlled Markov chain; best responses are
occupation-measure LPs whose duals are discrete Bellman subsolutions, and
equilibria are certified through the primal-dual residual system.
"""

from .certify import ResidualReport, complementarity, simulate_consistency, verify_ne
from .discretize import build_generator, discretize, transition_kernel
from .dual import build_dual, check_dual_feasible
from .equilibrium import EquilibriumCandidate, best_response, find_equilibria, fixed_point_iterate
from .errors import (
    ConfigError,
    DiscretizationError,
    InconsistentMeasureError,
    LPSolverError,
    MFGError,
    ModelEvaluationError,
    StabilityError,
)
from .hjbfp import compare, hjbfp_fixed_point, solve_fp, solve_hjb
from .lp_core import LinearProgram, LPSolution, solve_lp
from .measures import DualCertificate, MeanFieldFlow, OccupationMeasure, Policy
from .model import GridSpec, MFGModel, check_nondegeneracy, evaluate, list_models, make_model
from .occupation import build_primal, disintegrate, marginals, propagate

__all__ = [
    "ConfigError",
    "DiscretizationError",
    "DualCertificate",
    "EquilibriumCandidate",
    "GridSpec",
    "InconsistentMeasureError",
    "LPSolution",
    "LPSolverError",
    "LinearProgram",
    "MFGError",
    "MFGModel",
    "MeanFieldFlow",
    "ModelEvaluationError",
    "OccupationMeasure",
    "Policy",
    "ResidualReport",
    "StabilityError",
    "best_response",
    "build_dual",
    "build_generator",
    "build_primal",
    "check_dual_feasible",
    "check_nondegeneracy",
    "compare",
    "complementarity",
    "discretize",
    "disintegrate",
    "evaluate",
    "find_equilibria",
    "fixed_point_iterate",
    "hjbfp_fixed_point",
    "list_models",
    "make_model",
    "marginals",
    "propagate",
    "simulate_consistency",
    "solve_fp",
    "solve_hjb",
    "solve_lp",
    "transition_kernel",
    "verify_ne",
]
