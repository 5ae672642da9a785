"""Parameter records, radial grids, field containers and profile predicates.

Everything here is immutable after construction and shared freely by the
solver and the analysis modules.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

MONOTONE_TOL = 1e-10  # relative tolerance for discrete radial monotonicity


class Variant(enum.Enum):
    """Exponential nonlinearity flavour: f(v)=e^{pv} or f(v)=e^{pv}-1."""

    EXP = "exp"
    EXP_MINUS_ONE = "exp_minus_one"

    @property
    def m(self) -> int:
        """Subtracted constant: 0 for EXP, 1 for EXP_MINUS_ONE."""
        return 0 if self is Variant.EXP else 1


class BoundaryCondition(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    # Whole-space problem truncated to a finite ball with a reflecting
    # outer boundary; convergence under R-doubling is checked in tests.
    CAUCHY_TRUNCATED = "cauchy_truncated"


class StopReason(enum.Enum):
    AMPLITUDE_CAP = "amplitude_cap"
    TIME_HORIZON = "time_horizon"
    STEP_UNDERFLOW = "step_underflow"


class ConfigurationError(ValueError):
    """Rejected parameter set or grid request."""


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the two-component system u_t = d1*Lap(u) + f(v),
    v_t = d2*Lap(v) + g(u) with f(v)=e^{pv}-m, g(u)=e^{qu}-m on a ball
    of radius R in dimension n."""

    delta1: float
    delta2: float
    p: float
    q: float
    variant: Variant = Variant.EXP
    n: int = 1
    R: float = 1.0
    bc: BoundaryCondition = BoundaryCondition.NEUMANN

    def __post_init__(self):
        for name in ("delta1", "delta2", "p", "q", "R"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be strictly positive")
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ConfigurationError("n must be an integer >= 1")
        if self.bc is BoundaryCondition.DIRICHLET and self.variant is not Variant.EXP_MINUS_ONE:
            # zero boundary data is only consistent with f(0)=g(0)=0
            raise ConfigurationError("Dirichlet boundary requires the minus-one variant")


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid rho_j = j*h, j=0..J, with rho_J = R."""

    R: float
    J: int
    h: float
    nodes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.nodes.setflags(write=False)

    def __len__(self) -> int:
        return self.J + 1

    def nearest_index(self, rho: float) -> int:
        return int(round(rho / self.h))


def make_grid(R: float, J: int, *, floor: int = 8) -> RadialGrid:
    """Build the uniform radial grid with spacing h = R/J.

    The J >= 8 floor rejects grids too coarse for the second-order
    stencils; tests may relax it via ``floor``.
    """
    if not R > 0:
        raise ConfigurationError("R must be strictly positive")
    if J < floor:
        raise ConfigurationError(f"J={J} below minimum node-count floor {floor}")
    h = R / J
    nodes = h * np.arange(J + 1, dtype=float)
    if abs(nodes[-1] - R) > 1e-12 * R:
        raise ConfigurationError("grid endpoint drifted away from R")
    return RadialGrid(R=R, J=J, h=h, nodes=nodes)


@dataclass
class FieldState:
    """Paired radial profiles at one time instant."""

    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 1:
            raise ValueError("u and v must be 1-d arrays of identical length")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValueError("non-finite field values")


def is_radially_nonincreasing(fld: np.ndarray, tol: float = MONOTONE_TOL) -> bool:
    """True iff successive differences never rise above the relative noise floor."""
    fld = np.asarray(fld, dtype=float)
    diffs = np.diff(fld)
    scale = np.maximum(1.0, np.abs(fld[:-1]))
    return bool(np.all(diffs <= tol * scale))


def sup_norm(fld: np.ndarray) -> float:
    fld = np.asarray(fld, dtype=float)
    if fld.size == 0:
        raise ValueError("sup_norm of empty field")
    return float(np.max(np.abs(fld)))
