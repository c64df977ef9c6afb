"""Existence certificates and numerical periodic solutions for coupled second-order systems.

``z'' = f(t, z, w, z', w')``, ``w'' = g(t, z, w, z', w')`` with periodic
boundary conditions on ``[0, T]``, localized between shifted lower and upper
solutions.
"""

from .bounds import BoundQuadruple, PolyFunction, shift_lower, shift_upper, sup_norm
from .cases import builtin_case
from .certify import CertificationConfig, NagumoEnvelope, certify_all, derivative_bound
from .expr import Expression, ExpressionError, parse_expression
from .homotopy import AuxiliarySystem, compute_r, truncate
from .solver import (ContinuationSchedule, IntegratorConfig, NewtonConfig, ShootingProblem,
                     SolverConfig, StatePoint, Trajectory, continuation_solve, integrate_ivp,
                     localize_check, newton_solve, shoot_residual)
from .system import CoupledSystem, builtin_system

__all__ = [
    "AuxiliarySystem", "BoundQuadruple", "CertificationConfig", "ContinuationSchedule",
    "CoupledSystem", "Expression", "ExpressionError", "IntegratorConfig", "NagumoEnvelope",
    "NewtonConfig", "PolyFunction", "ShootingProblem", "SolverConfig", "StatePoint", "Trajectory",
    "builtin_case", "builtin_system", "certify_all", "compute_r", "continuation_solve",
    "derivative_bound", "integrate_ivp", "localize_check", "newton_solve", "parse_expression",
    "shift_lower", "shift_upper", "shoot_residual", "sup_norm", "truncate",
]
