import numpy as np
import pytest

import blowlab as bl
from blowlab.initial_data import BumpKind, make_bump
from blowlab.msystem import MSystemSpec, NonlinearityDescriptor, NonlinearityKind
from blowlab.solver import Snapshot, SolverConfig, Trajectory


def canonical_params() -> bl.ModelParams:
    return bl.ModelParams(delta1=1.0, delta2=2.0, p=1.0, q=2.0,
                          variant=bl.Variant.EXP, n=3, R=4.0,
                          bc=bl.BoundaryCondition.NEUMANN)


def canonical_run(J: int) -> bl.Trajectory:
    """Gauss-bump Neumann ball run used across the analysis tests."""
    params = canonical_params()
    cfg = SolverConfig(amplitude_cap=30.0, reaction_safety=0.02, t_horizon=5.0)
    grid = bl.make_grid(params.R, J)
    u0, v0 = make_bump(BumpKind.GAUSS_NEUMANN, 1.0, grid, width=1.4)
    return bl.integrate(params, cfg, bl.FieldState(t=0.0, u=u0, v=v0), grid)


@pytest.fixture(scope="session")
def canon_run_256():
    return canonical_run(256)


@pytest.fixture(scope="session")
def canon_run_512():
    return canonical_run(512)


@pytest.fixture(scope="session")
def flat_run():
    """Spatially homogeneous blow-up: p=q=1, zero data, closed form
    u(t) = -log(1-t)."""
    params = bl.ModelParams(delta1=1.0, delta2=1.0, p=1.0, q=1.0, n=1, R=1.0)
    cfg = SolverConfig(amplitude_cap=30.0, reaction_safety=0.02, t_horizon=5.0)
    grid = bl.make_grid(1.0, 64)
    zero = np.zeros(grid.J + 1)
    return bl.integrate(params, cfg, bl.FieldState(t=0.0, u=zero, v=zero.copy()), grid)


@pytest.fixture(scope="session")
def power_run():
    """m=2 cubic power system with unequal diffusivities, bump data."""
    spec = MSystemSpec(deltas=(1.0, 2.0), nonlinearities=(
        NonlinearityDescriptor(NonlinearityKind.POWER, 3.0),
        NonlinearityDescriptor(NonlinearityKind.POWER, 3.0)))
    grid = bl.make_grid(4.0, 128)
    u0, v0 = make_bump(BumpKind.GAUSS_NEUMANN, 2.0, grid, width=1.4)
    cfg = SolverConfig(power_cap=1e8, reaction_safety=0.02, t_horizon=5.0)
    return bl.integrate_msystem(spec, grid, 3, cfg, [u0, v0])


@pytest.fixture(scope="session")
def power_run_m3():
    """m=3 quadratic system on flat data; exact solution 1/(1-t)."""
    spec = MSystemSpec(deltas=(1.0, 1.0, 1.0), nonlinearities=tuple(
        NonlinearityDescriptor(NonlinearityKind.POWER, 2.0) for _ in range(3)))
    grid = bl.make_grid(1.0, 8)
    cfg = SolverConfig(power_cap=1e8, cfl_safety=0.02, reaction_safety=0.002,
                       t_horizon=5.0)
    return bl.integrate_msystem(spec, grid, 1, cfg,
                                [np.ones(grid.J + 1) for _ in range(3)])


def synthetic_trajectory(t, u_max, v_max, params=None, probes=None,
                         probe_radii=(0.5, 1.0, 2.0, 3.0),
                         stop=bl.StopReason.AMPLITUDE_CAP,
                         amplitude_cap=None) -> Trajectory:
    """Trajectory stub for analysis tests that only need sample series."""
    params = params or canonical_params()
    t = np.asarray(t, dtype=float)
    amps = np.stack([np.asarray(u_max, float), np.asarray(v_max, float)], axis=1)
    radii = np.asarray(probe_radii, dtype=float)
    if probes is None:
        probes = np.zeros((t.size, 2, radii.size))
    grid = bl.make_grid(params.R, 64)
    cap = amplitude_cap
    if cap is None:
        cap = float(np.max([params.q * amps[:, 0].max(), params.p * amps[:, 1].max()]))
    cfg = SolverConfig(amplitude_cap=min(cap, 700.0), t_horizon=max(float(t[-1]), 1e-6) * 2)
    idx = np.array([grid.nearest_index(r) for r in radii], dtype=np.int64)
    zero = np.zeros((2, grid.J + 1))
    final = [[Snapshot(t=float(t[-1]), fields=zero)]]
    return Trajectory(model=params, grid=grid, config=cfg, probe_radii=radii,
                      probe_indices=idx, t=t, amps=amps,
                      probes=np.asarray(probes, dtype=float), checkpoints=final,
                      stop=stop, t_stop=float(t[-1]), total_steps=t.size)
