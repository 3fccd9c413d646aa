"""Constraint qualifications, stationarity and error bounds for nonsmooth
systems with complementarity constraints, with a bilevel reformulation layer.
"""

from . import config
from .bilevel import (BilevelProgram, CombinedProgram, augmented_kkt_jacobian, build_combined_program,
                      combined_penalty, danskin_generators, feasibility_jacobian, kkt_jacobian,
                      multiplier_block, value_function, w_generators)
from .cq import (CQReport, SamplingPlan, check_fullrank, check_lcq, check_nnamcq, implication_checks,
                 probe_rcpld, probe_rcrcq)
from .errorbound import distance_to_feasible, estimate_error_bound_modulus, residual_phi
from .expr import abs_, const, exp, gradient, hessian, ln, max_, min_, power, subdifferential_vertices, var
from .problemfile import ProblemFile, ProblemFileError
from .sets import Box, FullSpace, Polyhedron, PolyhedralUnion, Sawtooth, Segment
from .stationarity import check_mstationarity, solve_penalized
from .system import FeasibilitySystem, active_index_sets, is_feasible
from .vcalc import dist_omega, normal_cone_omega, phi0, project_omega

__version__ = "0.1.0"

__all__ = [
    "config", "BilevelProgram", "CombinedProgram", "augmented_kkt_jacobian", "build_combined_program",
    "combined_penalty", "danskin_generators", "feasibility_jacobian", "kkt_jacobian", "multiplier_block",
    "value_function", "w_generators", "CQReport", "SamplingPlan", "check_fullrank", "check_lcq",
    "check_nnamcq", "implication_checks", "probe_rcpld", "probe_rcrcq", "distance_to_feasible",
    "estimate_error_bound_modulus", "residual_phi", "abs_", "const", "exp", "gradient", "hessian", "ln",
    "max_", "min_", "power", "subdifferential_vertices", "var", "ProblemFile", "ProblemFileError", "Box",
    "FullSpace", "Polyhedron", "PolyhedralUnion", "Sawtooth", "Segment", "check_mstationarity",
    "solve_penalized", "FeasibilitySystem", "active_index_sets", "is_feasible", "dist_omega",
    "normal_cone_omega", "phi0", "project_omega",
]
