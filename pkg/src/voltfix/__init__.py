"""Numerical tools for Volterra-Hammerstein integral equations.

``x(t) = f(t, int_0^t g(t, s, x(s)) ds, x(t))`` on a truncated half-line:
an expression language for ``f`` and ``g``, quadrature on uniform grids,
fixed-point solvers, sampled checks of the existence hypotheses, and a
sampled measure of noncompactness.
"""

from .comparison import ComparisonTriple, PropertyReport, comparison_suite, preset_triple
from .expr import ExprError, compile_expr, evaluate, parse_expr, to_source
from .grid import Grid, GridFunction, sup_norm_distance
from .kernels import BACKEND
from .mnc import Ensemble, MncEstimate, darbo_iterate, estimate_mu, hull_sample
from .problem import IntegralProblem, check_hypotheses, find_r0
from .solver import SolverConfig, SolveResult, apply_T, solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ComparisonTriple",
    "Ensemble",
    "ExprError",
    "Grid",
    "GridFunction",
    "IntegralProblem",
    "MncEstimate",
    "PropertyReport",
    "SolveResult",
    "SolverConfig",
    "apply_T",
    "check_hypotheses",
    "comparison_suite",
    "compile_expr",
    "darbo_iterate",
    "estimate_mu",
    "evaluate",
    "find_r0",
    "hull_sample",
    "parse_expr",
    "preset_triple",
    "solve",
    "sup_norm_distance",
    "to_source",
]
