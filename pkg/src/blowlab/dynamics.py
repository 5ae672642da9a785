"""Nonlinearities, the exponential change of variables, and residual checks.

The transformed pair U = p e^{qu}, V = q e^{pv} turns solutions of the
original system into subsolutions of U_t <= d1*Lap(U) + UV (with equality
up to the gradient correction for the plain exponential variant), which is
what the pointwise residual check below measures on recorded profiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FieldState, ModelParams, RadialGrid, Variant
from .solver import radial_laplacian

OVERFLOW_GUARD = 700.0  # e^709 is the double-precision ceiling; keep margin


class SaturationError(OverflowError):
    """Exponent beyond the overflow guard; the caller should have stopped."""


@dataclass(frozen=True)
class NonlinearityPair:
    """f(s) = e^{ps} - m and g(s) = e^{qs} - m with m in {0, 1}."""

    p: float
    q: float
    variant: Variant = Variant.EXP

    @property
    def m(self) -> int:
        return self.variant.m

    def f(self, s):
        return eval_f(s, self)

    def g(self, s):
        return eval_g(s, self)

    @classmethod
    def from_params(cls, params: ModelParams) -> "NonlinearityPair":
        return cls(p=params.p, q=params.q, variant=params.variant)


def _guarded_exp(exponent):
    exponent = np.asarray(exponent, dtype=float)
    if np.any(exponent > OVERFLOW_GUARD):
        raise SaturationError(f"exponent {float(np.max(exponent)):.3g} beyond overflow guard")
    return np.exp(exponent)


def eval_f(s, pair: NonlinearityPair):
    """f(s) = e^{ps} - m, elementwise on arrays."""
    out = _guarded_exp(pair.p * np.asarray(s, dtype=float)) - pair.m
    return float(out) if np.ndim(s) == 0 else out


def eval_g(s, pair: NonlinearityPair):
    """g(s) = e^{qs} - m, elementwise on arrays."""
    out = _guarded_exp(pair.q * np.asarray(s, dtype=float)) - pair.m
    return float(out) if np.ndim(s) == 0 else out


def transform_UV(state: FieldState, params: ModelParams):
    """Nodewise U = p e^{qu}, V = q e^{pv}."""
    U = params.p * _guarded_exp(params.q * state.u)
    V = params.q * _guarded_exp(params.p * state.v)
    return U, V


def _centered_gradient(fld: np.ndarray, h: float) -> np.ndarray:
    grad = np.empty_like(fld)
    grad[1:-1] = (fld[2:] - fld[:-2]) / (2.0 * h)
    grad[0] = 0.0  # radial symmetry
    grad[-1] = (fld[-1] - fld[-2]) / h
    return grad


def subsolution_residual(state: FieldState, params: ModelParams, grid: RadialGrid,
                         du_dt: np.ndarray, dv_dt: np.ndarray):
    """Interior residuals of the transformed system.

    r_U = U_t - d1*Lap(U) - U V + d1*(U_rho)^2/U, and symmetrically for V.
    For the plain exponential variant r_U vanishes identically (up to the
    discretization error), for the minus-one variant r_U = -q*U <= 0.
    Time derivatives of u, v are supplied by the caller (forward differences
    of adjacent checkpoint states); interior nodes only.
    """
    U, V = transform_UV(state, params)
    if np.any(U <= 0.0) or np.any(V <= 0.0):
        raise ZeroDivisionError("transformed fields must be strictly positive")
    U_t = params.q * U * np.asarray(du_dt, dtype=float)
    V_t = params.p * V * np.asarray(dv_dt, dtype=float)
    lap_U = radial_laplacian(U, grid, params.n, params.bc)
    lap_V = radial_laplacian(V, grid, params.n, params.bc)
    grad_U = _centered_gradient(U, grid.h)
    grad_V = _centered_gradient(V, grid.h)
    r_U = U_t - params.delta1 * lap_U - U * V + params.delta1 * grad_U**2 / U
    r_V = V_t - params.delta2 * lap_V - U * V + params.delta2 * grad_V**2 / V
    return r_U[1:-1], r_V[1:-1]


def residual_from_burst(burst, params: ModelParams, grid: RadialGrid):
    """Residuals at the first state of a checkpoint burst, with u_t, v_t from
    the forward difference to the next state in the burst."""
    if len(burst) < 2:
        raise ValueError("need at least two adjacent snapshots")
    s0, s1 = burst[0], burst[1]
    dt = s1.t - s0.t
    if not dt > 0:
        raise ValueError("burst snapshots must be strictly increasing in time")
    du_dt = (s1.fields[0] - s0.fields[0]) / dt
    dv_dt = (s1.fields[1] - s0.fields[1]) / dt
    state = FieldState(t=s0.t, u=s0.fields[0], v=s0.fields[1])
    return subsolution_residual(state, params, grid, du_dt, dv_dt)


def gradient_bound_check(state: FieldState, grid: RadialGrid) -> float:
    """Worst ratio (u_rho)^2 / (2 e^{max u}).

    Recorded as an exploratory diagnostic only: the scalar-equation gradient
    bound is not expected to survive for systems, so this is never asserted.
    """
    grad = _centered_gradient(state.u, grid.h)
    u_max = float(np.max(state.u))
    return float(np.max(grad**2) / (2.0 * np.exp(u_max)))
