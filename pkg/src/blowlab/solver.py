"""Radial method-of-lines integrator with adaptive explicit stepping.

The integrator advances the semidiscrete system with classical RK4 and a
step size limited by the diffusion CFL number and by the fastest normalized
reaction rate, so each step moves the capped amplitude max(q*u_max, p*v_max)
by at most ``reaction_safety``.  Blow-up is never decided here: a run ends
with a stop reason (amplitude cap / time horizon / step underflow) and the
classification happens in :mod:`blowlab.blowup_analysis`.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import engine
from .core import (BoundaryCondition, ConfigurationError, FieldState,
                   ModelParams, RadialGrid, StopReason, Variant)

DEFAULT_PROBE_FRACTIONS = (0.125, 0.25, 0.5, 0.75)


@dataclass(frozen=True)
class SolverConfig:
    cfl_safety: float = 0.25
    reaction_safety: float = 0.05
    # cap on max(q*u_max, p*v_max); must stay below the overflow guard 700.
    # Note the adaptive dt reaches the 1e-16 underflow floor near normalized
    # amplitude ~34 for O(1) blow-up times, so runs meant to stop at the cap
    # should configure a cap around 30.
    amplitude_cap: float = 600.0
    power_cap: float = 1e8  # cap on max_i u_i for power nonlinearities
    t_horizon: float = 10.0
    sample_stride: int = 1
    checkpoint_times: tuple = ()
    # take a 3-state checkpoint burst whenever the normalized amplitude
    # crosses the next multiple of this stride (None: cap/24)
    checkpoint_amp_stride: Optional[float] = None
    probe_fractions: tuple = DEFAULT_PROBE_FRACTIONS
    max_total_steps: int = 100_000_000

    def __post_init__(self):
        if not (0.0 < self.cfl_safety <= 1.0 and 0.0 < self.reaction_safety <= 1.0):
            raise ConfigurationError("safety factors must lie in (0, 1]")
        if self.amplitude_cap > 700.0:
            raise ConfigurationError("amplitude_cap above the exp overflow guard 700")
        if not self.t_horizon > 0:
            raise ConfigurationError("t_horizon must be positive")
        if self.sample_stride < 1:
            raise ConfigurationError("sample_stride must be >= 1")


@dataclass
class Snapshot:
    """Full profile copy at one accepted step; fields has shape (m, J+1)."""

    t: float
    fields: np.ndarray


@dataclass
class Trajectory:
    model: object  # ModelParams or MSystemSpec
    grid: RadialGrid
    config: SolverConfig
    probe_radii: np.ndarray
    probe_indices: np.ndarray
    t: np.ndarray            # (N,)
    amps: np.ndarray         # (N, m) componentwise max
    probes: np.ndarray       # (N, m, P)
    checkpoints: list        # list of bursts; burst = list[Snapshot] (<=3, step-adjacent)
    stop: StopReason = StopReason.TIME_HORIZON
    t_stop: float = 0.0
    total_steps: int = 0

    @property
    def m(self) -> int:
        return self.amps.shape[1]

    @property
    def u_max(self) -> np.ndarray:
        return self.amps[:, 0]

    @property
    def v_max(self) -> np.ndarray:
        return self.amps[:, 1]

    def probe_series(self, component: int, radius: float) -> np.ndarray:
        """Sampled values of one component at the probe closest to ``radius``."""
        k = int(np.argmin(np.abs(self.probe_radii - radius)))
        return self.probes[:, component, k]

    def snapshots(self):
        for burst in self.checkpoints:
            yield from burst

    def final_state(self) -> Snapshot:
        return self.checkpoints[-1][-1]


class _Recorder:
    def __init__(self, m: int, nprobes: int):
        cap = 1024
        self.t = np.empty(cap)
        self.amps = np.empty((cap, m))
        self.probes = np.empty((cap, m, nprobes))
        self.n = 0

    def push(self, t, amps, probes):
        if self.n == self.t.shape[0]:
            grow = self.t.shape[0] * 2
            self.t = np.resize(self.t, grow)
            self.amps = np.resize(self.amps, (grow,) + self.amps.shape[1:])
            self.probes = np.resize(self.probes, (grow,) + self.probes.shape[1:])
        self.t[self.n] = t
        self.amps[self.n] = amps
        self.probes[self.n] = probes
        self.n += 1

    def arrays(self):
        return self.t[:self.n].copy(), self.amps[:self.n].copy(), self.probes[:self.n].copy()


def _bc_code(bc: BoundaryCondition) -> int:
    return engine.BC_DIRICHLET if bc is BoundaryCondition.DIRICHLET else engine.BC_REFLECT


def descriptor_arrays(params: ModelParams):
    """Engine descriptors for the two-component system: component 0 is u
    (driven by f(v)=e^{pv}-m), component 1 is v (driven by g(u)=e^{qu}-m)."""
    sub = float(params.variant.m)
    kinds = np.array([engine.KIND_EXP, engine.KIND_EXP], dtype=np.int64)
    rates = np.array([params.p, params.q], dtype=float)
    subs = np.array([sub, sub], dtype=float)
    deltas = np.array([params.delta1, params.delta2], dtype=float)
    return deltas, kinds, rates, subs


def radial_laplacian(fld: np.ndarray, grid: RadialGrid, n: int,
                     bc: BoundaryCondition) -> np.ndarray:
    """Second-order radial Laplacian u'' + (n-1)/rho * u' on the grid.

    Origin uses the symmetry limit Lap(0) = 2n*(f1-f0)/h^2.  The outer node
    is 0 under Dirichlet (the value there is pinned, the Laplacian unused)
    and uses the ghost reflection f[J+1]=f[J-1] otherwise.
    """
    fld = np.asarray(fld, dtype=float)
    if fld.shape != (grid.J + 1,):
        raise ValueError("field length does not match grid")
    h = grid.h
    out = np.empty_like(fld)
    out[0] = 2.0 * n * (fld[1] - fld[0]) / h**2
    out[1:-1] = (fld[2:] - 2.0 * fld[1:-1] + fld[:-2]) / h**2
    if n > 1:
        out[1:-1] += ((n - 1) / grid.nodes[1:-1]) * (fld[2:] - fld[:-2]) / (2.0 * h)
    if bc is BoundaryCondition.DIRICHLET:
        out[-1] = 0.0
    else:
        out[-1] = 2.0 * (fld[-2] - fld[-1]) / h**2
    return out


def cap_measure(state_or_fields, params: ModelParams) -> float:
    """Normalized amplitude max(q*u_max, p*v_max)."""
    if isinstance(state_or_fields, FieldState):
        u, v = state_or_fields.u, state_or_fields.v
    else:
        u, v = state_or_fields[0], state_or_fields[1]
    return max(params.q * float(np.max(u)), params.p * float(np.max(v)))


def _integrate_fields(fields0: np.ndarray, model, grid: RadialGrid, n: int,
                      bc: BoundaryCondition, deltas, kinds, rates, subs,
                      cfg: SolverConfig) -> Trajectory:
    """Shared driver behind :func:`integrate` and the m-system integrator.

    The step sequence depends only on the model, grid and safety factors;
    sampling and checkpoint choices never alter it.
    """
    fields = np.array(fields0, dtype=float, order="C")
    m, npts = fields.shape
    if npts != grid.J + 1:
        raise ValueError("initial fields do not match the grid")
    if not np.all(np.isfinite(fields)):
        raise ValueError("non-finite initial data")
    bc_code = _bc_code(bc)
    if bc_code == engine.BC_DIRICHLET:
        fields[:, -1] = 0.0

    ws = engine.Workspace(m, npts)
    dt_diff = cfg.cfl_safety * grid.h**2 / (2.0 * n * float(np.max(deltas)))

    probe_idx = np.array(sorted({grid.nearest_index(f * grid.R) for f in cfg.probe_fractions}),
                         dtype=np.int64)
    probe_idx = probe_idx[(probe_idx > 0) & (probe_idx <= grid.J)]
    probe_radii = grid.nodes[probe_idx]

    has_exp = bool(np.any(kinds == engine.KIND_EXP))
    if has_exp:
        cap_scale = cfg.amplitude_cap
    else:
        cap_scale = math.log10(cfg.power_cap)
    amp_stride = cfg.checkpoint_amp_stride or cap_scale / 24.0

    def measure() -> float:
        phi_exp, phi_pow, _ = engine.stop_measures(fields, kinds, rates, subs)
        return phi_exp if has_exp else math.log10(max(phi_pow, 1.0))

    rec = _Recorder(m, probe_idx.size)
    checkpoints: list = []
    t = 0.0
    tcomp = 0.0
    total = 0
    pending_times = sorted(cfg.checkpoint_times)
    next_threshold = amp_stride
    burst_pending = 0
    burst: list = []
    recent: deque = deque(maxlen=3)  # rolling buffer for the final burst

    def record_sample():
        rec.push(t + tcomp, fields.max(axis=1), fields[:, probe_idx])

    def want_checkpoint() -> bool:
        nonlocal next_threshold, pending_times
        fire = False
        phi = measure()
        while phi >= next_threshold:
            next_threshold += amp_stride
            fire = True
        while pending_times and t + tcomp >= pending_times[0]:
            pending_times.pop(0)
            fire = True
        return fire

    record_sample()
    if want_checkpoint():
        burst = [Snapshot(t + tcomp, fields.copy())]
        checkpoints.append(burst)
        burst_pending = 2
    recent.append(Snapshot(t + tcomp, fields.copy()))

    stop = StopReason.TIME_HORIZON
    while True:
        max_steps = 1 if burst_pending > 0 else cfg.sample_stride
        t, tcomp, steps, code = engine.advance_chunk(
            fields, ws, t, tcomp, deltas, kinds, rates, subs, n, grid.h,
            bc_code, dt_diff, cfg.reaction_safety, cfg.amplitude_cap,
            cfg.power_cap, cfg.t_horizon, max_steps)
        total += steps
        if steps > 0:
            record_sample()
            if burst_pending > 0:
                burst.append(Snapshot(t + tcomp, fields.copy()))
                burst_pending -= 1
            elif code == engine.CHUNK_DONE and want_checkpoint():
                burst = [Snapshot(t + tcomp, fields.copy())]
                checkpoints.append(burst)
                burst_pending = 2
            recent.append(Snapshot(t + tcomp, fields.copy()))
        if code != engine.CHUNK_DONE:
            stop = {engine.HIT_AMPLITUDE_CAP: StopReason.AMPLITUDE_CAP,
                    engine.HIT_TIME_HORIZON: StopReason.TIME_HORIZON,
                    engine.HIT_STEP_UNDERFLOW: StopReason.STEP_UNDERFLOW}[code]
            break
        if total >= cfg.max_total_steps:
            raise RuntimeError(f"step budget {cfg.max_total_steps} exhausted at t={t}")

    # final burst: the last up-to-three recorded boundary states
    t_final = t + tcomp
    final = list(recent)
    if not final or final[-1].t < t_final:
        final.append(Snapshot(t_final, fields.copy()))
    if not checkpoints or checkpoints[-1][-1].t < t_final:
        checkpoints.append(final[-3:])

    ts, amps, probes = rec.arrays()
    return Trajectory(model=model, grid=grid, config=cfg,
                      probe_radii=probe_radii, probe_indices=probe_idx,
                      t=ts, amps=amps, probes=probes, checkpoints=checkpoints,
                      stop=stop, t_stop=t_final, total_steps=total)


def integrate(params: ModelParams, cfg: SolverConfig, initial: FieldState,
              grid: RadialGrid) -> Trajectory:
    """Run the two-component system until a stop event."""
    deltas, kinds, rates, subs = descriptor_arrays(params)
    fields0 = np.stack([initial.u, initial.v])
    return _integrate_fields(fields0, params, grid, params.n, params.bc,
                             deltas, kinds, rates, subs, cfg)


def step(state: FieldState, params: ModelParams, cfg: SolverConfig,
         grid: RadialGrid) -> FieldState:
    """One accepted RK4 step; raises if the state is already at a stop event."""
    deltas, kinds, rates, subs = descriptor_arrays(params)
    fields = np.stack([state.u, state.v]).astype(float)
    if params.bc is BoundaryCondition.DIRICHLET:
        fields[:, -1] = 0.0
    ws = engine.Workspace(2, fields.shape[1])
    dt_diff = cfg.cfl_safety * grid.h**2 / (2.0 * params.n * max(params.delta1, params.delta2))
    t, tcomp, steps, code = engine.advance_chunk(
        fields, ws, state.t, 0.0, deltas, kinds, rates, subs, params.n,
        grid.h, _bc_code(params.bc), dt_diff, cfg.reaction_safety,
        cfg.amplitude_cap, cfg.power_cap, np.inf, 1)
    if steps != 1:
        reason = {engine.HIT_AMPLITUDE_CAP: "amplitude cap reached",
                  engine.HIT_STEP_UNDERFLOW: "step underflow"}.get(code, "no step taken")
        raise RuntimeError(f"cannot step: {reason}")
    return FieldState(t=t + tcomp, u=fields[0], v=fields[1])


@dataclass
class OdeSolution:
    """Spatially homogeneous companion problem u' = f(v), v' = g(u)."""

    p: float
    q: float
    u0: float
    v0: float
    variant: Variant
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    t_end: float
    T_exact: Optional[float] = None
    _dense: object = None

    def __call__(self, t):
        uv = self._dense(t)
        return uv[0], uv[1]


def solve_homogeneous_ode(p: float, q: float, u0: float, v0: float,
                          variant: Variant = Variant.EXP,
                          cap: float = 30.0, t_max: float = 1e6,
                          rtol: float = 1e-12) -> OdeSolution:
    """High-accuracy reference integration of the flat-profile dynamics.

    For the symmetric exponential case (p=q, u0=v0) the closed form
    u(t) = -(1/p) log(e^{-p u0} - p t) with T = e^{-p u0}/p is attached.
    """
    if u0 < 0 or v0 < 0:
        raise ValueError("homogeneous data must be nonnegative")
    m = float(variant.m)

    def rhs(_t, y):
        return [math.exp(p * y[1]) - m, math.exp(q * y[0]) - m]

    def hit_cap(_t, y):
        return max(q * y[0], p * y[1]) - cap
    hit_cap.terminal = True
    hit_cap.direction = 1.0

    sol = solve_ivp(rhs, (0.0, t_max), [float(u0), float(v0)], method="DOP853",
                    rtol=rtol, atol=1e-14, dense_output=True, events=hit_cap)
    T_exact = None
    if variant is Variant.EXP and p == q and u0 == v0:
        T_exact = math.exp(-p * u0) / p
    return OdeSolution(p=p, q=q, u0=u0, v0=v0, variant=variant,
                       t=sol.t, u=sol.y[0], v=sol.y[1], t_end=float(sol.t[-1]),
                       T_exact=T_exact, _dense=sol.sol)


def solve_homogeneous_system(rhs_funcs: Sequence, y0: Sequence[float],
                             stop_amplitude: float, t_max: float = 1e6,
                             rtol: float = 1e-12):
    """Reference integration of u_i' = f_i(u_{i+1}) for m components.

    Returns the scipy solution object (dense output enabled); used as the
    oracle for flat-profile m-system runs.
    """
    mcomp = len(rhs_funcs)

    def rhs(_t, y):
        return [rhs_funcs[i](y[(i + 1) % mcomp]) for i in range(mcomp)]

    def hit(_t, y):
        return max(y) - stop_amplitude
    hit.terminal = True
    hit.direction = 1.0

    return solve_ivp(rhs, (0.0, t_max), list(map(float, y0)), method="DOP853",
                     rtol=rtol, atol=1e-14, dense_output=True, events=hit)
