"""Sign functionals on an annulus and component-comparison diagnostics.

The monitored pair g_u = u_rho + eps*c(rho)*e^{gamma u} (and its v analogue
with exponent gamma_bar = gamma*p/q) stays nonpositive late in single-point
blow-up runs once gamma and eps are chosen against the measured component
ratios; integrating the resulting slope bound across the annulus yields a
checkable lower bound on e^{-gamma u} at the outer annulus edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ConfigurationError, ModelParams, RadialGrid
from .solver import Snapshot, Trajectory

EPS_LADDER_DEPTH = 20  # halving candidates 1, 1/2, ..., 2^-20


@dataclass(frozen=True)
class AuxiliaryConfig:
    """Annulus [rho0/4, rho0/2] with barrier exponents and cutoff strength."""

    rho0: float
    gamma: float
    gamma_bar: float
    eps: float = 1.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ConfigurationError("rho0 must be positive")
        if not (0.0 < self.gamma < 1.0 and 0.0 < self.gamma_bar < 1.0):
            raise ConfigurationError("gamma and gamma_bar must lie in (0,1)")
        # eps = 0 degenerates the functionals to the bare slopes; allowed for
        # identity checks, while monitor-selected values are always positive
        if not 0.0 <= self.eps <= 1.0:
            raise ConfigurationError("eps must lie in [0,1]")

    @property
    def rho1(self) -> float:
        return self.rho0 / 4.0

    @property
    def rho2(self) -> float:
        return self.rho0 / 2.0

    @classmethod
    def build(cls, rho0: float, gamma: float, p: float, q: float,
              eps: float = 1.0) -> "AuxiliaryConfig":
        return cls(rho0=rho0, gamma=gamma, gamma_bar=gamma * p / q, eps=eps)


def cutoff(rho, cfg: AuxiliaryConfig):
    """Value and first two derivatives of sin^2(pi (rho-rho1)/(rho2-rho1))."""
    rho = np.asarray(rho, dtype=float)
    ell = cfg.rho2 - cfg.rho1
    if np.any(rho < cfg.rho1 - 1e-12 * ell) or np.any(rho > cfg.rho2 + 1e-12 * ell):
        raise ValueError("cutoff evaluated outside the annulus")
    x = np.pi * (rho - cfg.rho1) / ell
    c = np.sin(x) ** 2
    c1 = (np.pi / ell) * np.sin(2.0 * x)
    c2 = (2.0 * np.pi**2 / ell**2) * np.cos(2.0 * x)
    if np.ndim(rho) == 0:
        return float(c), float(c1), float(c2)
    return c, c1, c2


def cutoff_shape_term(rho, cfg: AuxiliaryConfig, n: int):
    """(n-1)/rho * (1/rho - c'/c) - c''/c, defined strictly inside the annulus.

    Diverges to -inf at both annulus edges; its interior sup is the constant
    entering the late-time sign argument.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= cfg.rho1) or np.any(rho >= cfg.rho2):
        raise ValueError("shape term defined only strictly inside the annulus")
    c, c1, c2 = cutoff(rho, cfg)
    out = (n - 1.0) / rho * (1.0 / rho - c1 / c) - c2 / c
    return float(out) if np.ndim(rho) == 0 else out


@dataclass(frozen=True)
class RatioBounds:
    """Measured bounds C1p <= e^{qu - pv} <= C2p over a window and annulus."""

    C1p: float
    C2p: float
    window: tuple
    annulus: tuple
    add_u_min: float = math.nan  # extrema of log(T_est - t) + q u
    add_u_max: float = math.nan
    add_v_min: float = math.nan
    add_v_max: float = math.nan

    def __post_init__(self):
        if self.C1p > self.C2p:
            raise ValueError("C1p must not exceed C2p")


def _window_snapshots(traj: Trajectory, window) -> list:
    t_a, t_b = window
    snaps = [s for s in traj.snapshots() if t_a <= s.t <= t_b]
    if not snaps:
        raise ValueError(f"no checkpoints inside window [{t_a}, {t_b}]")
    return snaps


def _annulus_indices(grid: RadialGrid, rho1: float, rho2: float) -> np.ndarray:
    idx = np.nonzero((grid.nodes >= rho1 - 1e-12 * grid.R)
                     & (grid.nodes <= rho2 + 1e-12 * grid.R))[0]
    if idx.size < 17:
        raise ConfigurationError("annulus resolved by fewer than 16 grid cells")
    if idx[0] == 0 or idx[-1] == grid.J:
        raise ConfigurationError("annulus must be interior to the grid")
    return idx


def measure_ratio_bounds(traj: Trajectory, window, annulus, params: Optional[ModelParams] = None,
                         T_est: Optional[float] = None) -> RatioBounds:
    """Extrema of e^{qu - pv} over window x annulus from checkpoint profiles."""
    params = params or traj.model
    snaps = _window_snapshots(traj, window)
    idx = np.nonzero((traj.grid.nodes >= annulus[0]) & (traj.grid.nodes <= annulus[1]))[0]
    if idx.size == 0:
        raise ValueError("annulus contains no grid nodes")
    lo, hi = math.inf, -math.inf
    au = [math.inf, -math.inf]
    av = [math.inf, -math.inf]
    for s in snaps:
        u = s.fields[0][idx]
        v = s.fields[1][idx]
        r = np.exp(params.q * u - params.p * v)
        lo = min(lo, float(np.min(r)))
        hi = max(hi, float(np.max(r)))
        if T_est is not None and s.t < T_est:
            shift = math.log(T_est - s.t)
            au[0] = min(au[0], shift + params.q * float(np.min(u)))
            au[1] = max(au[1], shift + params.q * float(np.max(u)))
            av[0] = min(av[0], shift + params.p * float(np.min(v)))
            av[1] = max(av[1], shift + params.p * float(np.max(v)))
    if T_est is None:
        au = av = (math.nan, math.nan)
    return RatioBounds(C1p=lo, C2p=hi, window=tuple(window), annulus=tuple(annulus),
                       add_u_min=au[0], add_u_max=au[1], add_v_min=av[0], add_v_max=av[1])


def barrier_inequalities(gamma: float, bounds: RatioBounds, p: float, q: float,
                         convention: str = "both") -> bool:
    """The three smallness conditions on gamma against measured ratio bounds.

    The middle condition involves gamma_bar, which the source material writes
    both as gamma*p/q and as gamma*q/p; ``convention`` picks 'primary'
    (gamma*p/q), 'alternate' (gamma*q/p), or 'both' (conservative).
    """
    checks = [gamma < p * bounds.C2p ** (-gamma / q), gamma < q]
    if convention in ("primary", "both"):
        checks.append(gamma * p / q < q * bounds.C1p ** (gamma / q))
    if convention in ("alternate", "both"):
        checks.append(gamma * q / p < q * bounds.C1p ** (gamma / q))
    if convention not in ("primary", "alternate", "both"):
        raise ValueError(f"unknown convention {convention!r}")
    return all(checks)


def select_gamma(bounds: RatioBounds, p: float, q: float,
                 convention: str = "both"):
    """Largest gamma = 2^{-k} min(p, q) meeting the smallness conditions with
    a factor-1/2 margin; paired with gamma_bar = gamma p / q."""
    gamma = min(p, q)
    for _ in range(200):
        margin_ok = (gamma <= 0.5 * p * bounds.C2p ** (-gamma / q)
                     and gamma <= 0.5 * q
                     and gamma * p / q <= 0.5 * q * bounds.C1p ** (gamma / q)
                     and (convention != "both"
                          or gamma * q / p <= 0.5 * q * bounds.C1p ** (gamma / q)))
        if gamma < 1.0 and margin_ok:
            return gamma, gamma * p / q
        gamma *= 0.5
    raise RuntimeError("gamma selection did not terminate")


def sign_functional_pair(state_fields: np.ndarray, grid: RadialGrid,
                         cfg: AuxiliaryConfig):
    """g_u = u_rho + eps c e^{gamma u} and g_v = v_rho + eps c e^{gamma_bar v}
    on the annulus nodes; returns (g_u, g_v, node_indices).

    u_rho is the centered difference of the profile; at the annulus edges the
    cutoff vanishes so the functionals reduce to the slopes themselves.
    """
    idx = _annulus_indices(grid, cfg.rho1, cfg.rho2)
    u = state_fields[0]
    v = state_fields[1]
    h = grid.h
    du = (u[idx + 1] - u[idx - 1]) / (2.0 * h)
    dv = (v[idx + 1] - v[idx - 1]) / (2.0 * h)
    c, _, _ = cutoff(np.clip(grid.nodes[idx], cfg.rho1, cfg.rho2), cfg)
    g_u = du + cfg.eps * c * np.exp(cfg.gamma * u[idx])
    g_v = dv + cfg.eps * c * np.exp(cfg.gamma_bar * v[idx])
    return g_u, g_v, idx


def select_epsilon(snapshot: Snapshot, grid: RadialGrid,
                   cfg: AuxiliaryConfig) -> Optional[float]:
    """Largest eps in {1, 1/2, ..., 2^-20} with both functionals <= 0 at the
    given state; None when no ladder member qualifies (e.g. flat profiles)."""
    for k in range(EPS_LADDER_DEPTH + 1):
        eps = 2.0 ** (-k)
        trial = AuxiliaryConfig(rho0=cfg.rho0, gamma=cfg.gamma,
                                gamma_bar=cfg.gamma_bar, eps=eps)
        g_u, g_v, _ = sign_functional_pair(snapshot.fields, grid, trial)
        if float(np.max(g_u)) <= 0.0 and float(np.max(g_v)) <= 0.0:
            return eps
    return None


@dataclass(frozen=True)
class SignMonitorReport:
    cfg: AuxiliaryConfig
    window: tuple
    checkpoint_t: np.ndarray
    max_g_u: np.ndarray          # per checkpoint
    max_g_v: np.ndarray
    identity_ok: np.ndarray      # integrated slope bound, where max_g_u <= 0
    identity_margin: np.ndarray
    overall_max_u: float
    overall_max_v: float

    @property
    def cutoff_integral(self) -> float:
        return (self.cfg.rho2 - self.cfg.rho1) / 2.0


def default_late_window(traj: Trajectory) -> tuple:
    """[T1, t_stop] with T1 the first sample time past half the amplitude cap."""
    params = traj.model
    phi = np.maximum(params.q * traj.u_max, params.p * traj.v_max)
    past = np.nonzero(phi >= 0.5 * traj.config.amplitude_cap)[0]
    if past.size == 0:
        raise ValueError("run never reached half the amplitude cap")
    return float(traj.t[past[0]]), float(traj.t_stop)


def monitor_sign_functionals(traj: Trajectory, cfg: AuxiliaryConfig,
                             window: Optional[tuple] = None) -> SignMonitorReport:
    """Maxima of the sign functionals over window x annulus, plus the
    integrated consequence e^{-gamma u(t, rho2)} >= eps*gamma*(rho2-rho1)/2
    checked at every checkpoint where the u-functional is nonpositive."""
    if window is None:
        window = default_late_window(traj)
    snaps = _window_snapshots(traj, window)
    grid = traj.grid
    j2 = grid.nearest_index(cfg.rho2)
    ts, mu, mv, ok, margin = [], [], [], [], []
    lower = cfg.eps * cfg.gamma * (cfg.rho2 - cfg.rho1) / 2.0
    for s in snaps:
        g_u, g_v, _ = sign_functional_pair(s.fields, grid, cfg)
        ts.append(s.t)
        mu.append(float(np.max(g_u)))
        mv.append(float(np.max(g_v)))
        if mu[-1] <= 0.0:
            lhs = math.exp(-cfg.gamma * float(s.fields[0][j2]))
            ok.append(lhs >= lower)
            margin.append(lhs - lower)
        else:
            ok.append(False)
            margin.append(math.nan)
    return SignMonitorReport(cfg=cfg, window=tuple(window),
                             checkpoint_t=np.asarray(ts),
                             max_g_u=np.asarray(mu), max_g_v=np.asarray(mv),
                             identity_ok=np.asarray(ok, dtype=bool),
                             identity_margin=np.asarray(margin),
                             overall_max_u=float(np.max(mu)),
                             overall_max_v=float(np.max(mv)))
