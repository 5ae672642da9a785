"""Admissible initial data: bump generators and hypothesis verifiers.

The verifier checks the sign conditions d1*Lap(u0) + k*f(v0) >= 0 (and the
symmetric one) together with boundary compatibility, radial monotonicity and
nontriviality, for the three supported problem classes.  Data passing the
verifier produce time-monotone runs whose amplitudes never decrease.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (ConfigurationError, ModelParams, RadialGrid,
                   is_radially_nonincreasing)
from .dynamics import NonlinearityPair
from .solver import radial_laplacian

NONTRIVIAL_FLOOR = 1e-14  # fixed floor so pass(tol) stays monotone in tol


class DataCase(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    CAUCHY = "cauchy"


class BumpKind(enum.Enum):
    COS2_DIRICHLET = "cos2_dirichlet"
    GAUSS_NEUMANN = "gauss_neumann"


@dataclass(frozen=True)
class DataReport:
    case: DataCase
    min_residual_u: float
    min_residual_v: float
    nontrivial: bool
    boundary_ok: bool
    monotone: bool
    nonconstant: bool
    tol: float

    @property
    def passed(self) -> bool:
        return (self.nontrivial and self.boundary_ok and self.monotone
                and self.nonconstant
                and self.min_residual_u >= -self.tol
                and self.min_residual_v >= -self.tol)


def default_tolerance(grid: RadialGrid, amplitude_scale: float) -> float:
    # pointwise sign conditions can only be checked up to the O(h^2)
    # discretization noise of the Laplacian stencil
    return 1e-8 + 10.0 * grid.h**2 * max(1.0, amplitude_scale)


def verify_initial_data(u0: np.ndarray, v0: np.ndarray, params: ModelParams,
                        grid: RadialGrid, case: DataCase,
                        eps: float = 0.1, tol: Optional[float] = None) -> DataReport:
    """Check the sufficient conditions for a monotone, type-I blow-up run.

    ``eps`` is only used for the whole-space case, where the reaction terms
    enter with the factor (1 - eps), eps in (0, 1).
    """
    if not isinstance(case, DataCase):
        raise ConfigurationError(f"unknown data case: {case!r}")
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    scale = max(1.0, float(np.max(np.abs(u0))), float(np.max(np.abs(v0))))
    if tol is None:
        tol = default_tolerance(grid, scale)

    pair = NonlinearityPair.from_params(params)
    if case is DataCase.CAUCHY:
        if not 0.0 < eps < 1.0:
            raise ConfigurationError("eps must lie in (0, 1)")
        kappa = 1.0 - eps
    else:
        kappa = 1.0
    r_u = params.delta1 * radial_laplacian(u0, grid, params.n, params.bc) + kappa * pair.f(v0)
    r_v = params.delta2 * radial_laplacian(v0, grid, params.n, params.bc) + kappa * pair.g(u0)
    if case is DataCase.DIRICHLET:
        # outer value is pinned; the stencil there is not meaningful
        r_u, r_v = r_u[:-1], r_v[:-1]

    # nontriviality is checked against the unrelaxed reaction terms
    full_u = params.delta1 * radial_laplacian(u0, grid, params.n, params.bc) + pair.f(v0)
    full_v = params.delta2 * radial_laplacian(v0, grid, params.n, params.bc) + pair.g(u0)
    nontrivial = bool(np.max(np.abs(full_u)) > NONTRIVIAL_FLOOR * scale
                      or np.max(np.abs(full_v)) > NONTRIVIAL_FLOOR * scale)

    h = grid.h
    du_out = (u0[-1] - u0[-2]) / h
    dv_out = (v0[-1] - v0[-2]) / h
    if case is DataCase.DIRICHLET:
        boundary_ok = abs(u0[-1]) <= tol and abs(v0[-1]) <= tol
    elif case is DataCase.NEUMANN:
        # outward flux nonpositive for both components and equal between them
        boundary_ok = (du_out <= tol and dv_out <= tol
                       and abs(du_out - dv_out) <= tol)
    else:
        # truncated whole-space runs need a flat far field to be honest
        boundary_ok = abs(du_out) <= tol and abs(dv_out) <= tol

    monotone = is_radially_nonincreasing(u0) and is_radially_nonincreasing(v0)
    nonconstant = bool(np.ptp(u0) > NONTRIVIAL_FLOOR * scale
                       or np.ptp(v0) > NONTRIVIAL_FLOOR * scale)

    return DataReport(case=case,
                      min_residual_u=float(np.min(r_u)),
                      min_residual_v=float(np.min(r_v)),
                      nontrivial=nontrivial, boundary_ok=boundary_ok,
                      monotone=monotone, nonconstant=nonconstant, tol=tol)


def _flattened_square(rho: np.ndarray, R: float, shoulder_start: float) -> np.ndarray:
    """Monotone C^2 replacement Q(rho) for rho^2 with Q'(R) = 0 exactly.

    Q' = 2*rho inside rho_c = shoulder_start*R and is blended to zero at R
    with a quintic smoothstep, so exp(-Q/(2 w^2)) is a radially nonincreasing
    bump with vanishing outer slope.
    """
    rho_c = shoulder_start * R
    L = R - rho_c
    tau = np.clip((rho - rho_c) / L, 0.0, 1.0)
    # antiderivatives of w(tau) = 1 - (10 t^3 - 15 t^4 + 6 t^5) and tau*w(tau)
    W0 = tau - 2.5 * tau**4 + 3.0 * tau**5 - tau**6
    W1 = 0.5 * tau**2 - 2.0 * tau**5 + 2.5 * tau**6 - (6.0 / 7.0) * tau**7
    Q_out = rho_c**2 + 2.0 * L * (rho_c * W0 + L * W1)
    return np.where(rho <= rho_c, rho**2, Q_out)


def make_bump(kind: BumpKind, amplitude: float, grid: RadialGrid,
              width: Optional[float] = None, shoulder_start: float = 0.7):
    """Radially nonincreasing initial pair u0 = v0 on the grid.

    COS2_DIRICHLET: amplitude * cos^2(pi rho / 2R), zero on the boundary.
    GAUSS_NEUMANN: Gaussian of the given width, flattened near the outer
    boundary so the one-sided outer derivative vanishes to rounding.
    """
    if amplitude < 0:
        raise ConfigurationError("amplitude must be nonnegative")
    rho = grid.nodes
    if kind is BumpKind.COS2_DIRICHLET:
        u0 = amplitude * np.cos(np.pi * rho / (2.0 * grid.R)) ** 2
    elif kind is BumpKind.GAUSS_NEUMANN:
        w = width if width is not None else grid.R / 4.0
        if not w > 0:
            raise ConfigurationError("width must be positive")
        Q = _flattened_square(rho, grid.R, shoulder_start)
        u0 = amplitude * np.exp(-Q / (2.0 * w**2))
    else:
        raise ConfigurationError(f"unknown bump kind: {kind!r}")
    return u0, u0.copy()
