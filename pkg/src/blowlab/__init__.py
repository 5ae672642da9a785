"""Numerical laboratory for finite-time blow-up in non-equidiffusive
reaction-diffusion systems with exponential and power nonlinearities."""

from .core import (BoundaryCondition, ConfigurationError, FieldState,
                   ModelParams, RadialGrid, StopReason, Variant,
                   is_radially_nonincreasing, make_grid, sup_norm)
from .dynamics import (NonlinearityPair, eval_f, eval_g, gradient_bound_check,
                       subsolution_residual, transform_UV)
from .initial_data import BumpKind, DataCase, DataReport, make_bump, verify_initial_data
from .msystem import (MSystemSpec, NonlinearityDescriptor, NonlinearityKind,
                      epsilon_chain, find_growth_margin_eps1, growth_margin_report,
                      integrate_msystem)
from .solver import (OdeSolution, Snapshot, SolverConfig, Trajectory,
                     integrate, radial_laplacian, solve_homogeneous_ode, step)

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition", "BumpKind", "ConfigurationError", "DataCase",
    "DataReport", "FieldState", "ModelParams", "MSystemSpec",
    "NonlinearityDescriptor", "NonlinearityKind", "NonlinearityPair",
    "OdeSolution", "RadialGrid", "Snapshot", "SolverConfig", "StopReason",
    "Trajectory", "Variant", "epsilon_chain", "eval_f", "eval_g",
    "find_growth_margin_eps1", "gradient_bound_check", "growth_margin_report",
    "integrate", "integrate_msystem", "is_radially_nonincreasing", "make_bump",
    "make_grid", "radial_laplacian", "solve_homogeneous_ode", "step",
    "subsolution_residual", "sup_norm", "transform_UV", "verify_initial_data",
]
