"""Shared method-of-lines kernel for cyclic reaction-diffusion systems.

The two-component solver and the m-component generalization both drive this
kernel, so the m=2 reduction is bit-identical to the dedicated solver by
construction.  The kernel advances

    d(u_i)/dt = delta_i * Lap_n(u_i) + f_i(u_{i+1})     (cyclic, i = 0..m-1)

with classical RK4 and an adaptive step limited by both the diffusion CFL
number and the fastest normalized reaction rate.  f_i is either
exp(rate*s) - sub or max(s,0)**rate.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

KIND_EXP = 0
KIND_POWER = 1

BC_DIRICHLET = 0
BC_REFLECT = 1  # Neumann and truncated-Cauchy outer boundary

CHUNK_DONE = 0
HIT_AMPLITUDE_CAP = 1
HIT_TIME_HORIZON = 2
HIT_STEP_UNDERFLOW = 3

DT_MIN = 1e-16


@njit(cache=True)
def _nonlin(kind, rate, sub, s):
    if kind == KIND_EXP:
        return math.exp(rate * s) - sub
    if s <= 0.0:
        return 0.0
    return s ** rate


@njit(cache=True)
def _rhs(fields, out, deltas, kinds, rates, subs, n, h, bc):
    m, npts = fields.shape
    inv_h2 = 1.0 / (h * h)
    inv_2h = 0.5 / h
    coef = n - 1.0
    for i in range(m):
        f = fields[i]
        src = fields[(i + 1) % m]
        d = deltas[i]
        kind = kinds[i]
        rate = rates[i]
        sub = subs[i]
        # symmetry limit at the origin: Lap = 2n (f1 - f0)/h^2
        out[i, 0] = d * (2.0 * n * (f[1] - f[0]) * inv_h2) + _nonlin(kind, rate, sub, src[0])
        for j in range(1, npts - 1):
            lap = (f[j + 1] - 2.0 * f[j] + f[j - 1]) * inv_h2
            if coef > 0.0:
                lap += coef / (j * h) * (f[j + 1] - f[j - 1]) * inv_2h
            out[i, j] = d * lap + _nonlin(kind, rate, sub, src[j])
        if bc == BC_DIRICHLET:
            out[i, npts - 1] = 0.0
        else:
            # ghost reflection f[J+1] = f[J-1]
            out[i, npts - 1] = d * (2.0 * (f[npts - 2] - f[npts - 1]) * inv_h2) \
                + _nonlin(kind, rate, sub, src[npts - 1])


@njit(cache=True)
def _enforce_bc(fields, bc):
    if bc == BC_DIRICHLET:
        for i in range(fields.shape[0]):
            fields[i, fields.shape[1] - 1] = 0.0


@njit(cache=True)
def _amplitudes(fields, amps):
    m, npts = fields.shape
    for i in range(m):
        a = fields[i, 0]
        for j in range(1, npts):
            if fields[i, j] > a:
                a = fields[i, j]
        amps[i] = a


@njit(cache=True)
def _stop_measures(amps, kinds, rates, subs):
    """Return (phi_exp, phi_pow, rate_total).

    phi_exp caps the exponents rate_i * max(u_{i+1}); phi_pow caps the raw
    amplitude of power-consumed components; rate_total is the fastest
    normalized growth rate, used for the reaction step limit.
    """
    m = amps.shape[0]
    phi_exp = -np.inf
    phi_pow = -np.inf
    rate_total = 0.0
    for i in range(m):
        nxt = (i + 1) % m
        fval = _nonlin(kinds[nxt], rates[nxt], subs[nxt], amps[(nxt + 1) % m])
        if kinds[i] == KIND_EXP:
            a = rates[i] * amps[nxt]
            if a > phi_exp:
                phi_exp = a
            r = rates[i] * fval
        else:
            if amps[nxt] > phi_pow:
                phi_pow = amps[nxt]
            r = fval / max(amps[nxt], 1.0)
        if r > rate_total:
            rate_total = r
    return phi_exp, phi_pow, rate_total


@njit(cache=True)
def _advance(fields, k1, k2, k3, k4, ytmp, amps,
             t, tcomp, deltas, kinds, rates, subs, n, h, bc,
             dt_diff, reaction_safety, amplitude_cap, power_cap,
             t_horizon, max_steps):
    """Advance up to max_steps RK4 steps; stop early at a cap/horizon/underflow.

    Time is accumulated with Kahan compensation (t, tcomp) so that the
    recorded times stay faithful to the exact step sum deep into the
    reaction-limited regime.  Returns (t, tcomp, steps_taken, code).
    """
    m, npts = fields.shape
    steps = 0
    code = CHUNK_DONE
    while steps < max_steps:
        _amplitudes(fields, amps)
        phi_exp, phi_pow, rate_total = _stop_measures(amps, kinds, rates, subs)
        if phi_exp >= amplitude_cap or phi_pow >= power_cap:
            code = HIT_AMPLITUDE_CAP
            break
        if t + tcomp >= t_horizon:
            code = HIT_TIME_HORIZON
            break
        dt = dt_diff
        if rate_total > 0.0 and reaction_safety / rate_total < dt:
            dt = reaction_safety / rate_total
        if dt < DT_MIN:
            code = HIT_STEP_UNDERFLOW
            break

        _rhs(fields, k1, deltas, kinds, rates, subs, n, h, bc)
        for i in range(m):
            for j in range(npts):
                ytmp[i, j] = fields[i, j] + 0.5 * dt * k1[i, j]
        _enforce_bc(ytmp, bc)
        _rhs(ytmp, k2, deltas, kinds, rates, subs, n, h, bc)
        for i in range(m):
            for j in range(npts):
                ytmp[i, j] = fields[i, j] + 0.5 * dt * k2[i, j]
        _enforce_bc(ytmp, bc)
        _rhs(ytmp, k3, deltas, kinds, rates, subs, n, h, bc)
        for i in range(m):
            for j in range(npts):
                ytmp[i, j] = fields[i, j] + dt * k3[i, j]
        _enforce_bc(ytmp, bc)
        _rhs(ytmp, k4, deltas, kinds, rates, subs, n, h, bc)
        sixth = dt / 6.0
        for i in range(m):
            for j in range(npts):
                fields[i, j] = fields[i, j] + sixth * (
                    k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
        _enforce_bc(fields, bc)

        # Kahan step t += dt
        y = dt - tcomp
        tt = t + y
        tcomp = (tt - t) - y
        t = tt
        steps += 1
    return t, tcomp, steps, code


class Workspace:
    """Preallocated stage buffers for one integration."""

    def __init__(self, m: int, npts: int):
        self.k1 = np.empty((m, npts))
        self.k2 = np.empty((m, npts))
        self.k3 = np.empty((m, npts))
        self.k4 = np.empty((m, npts))
        self.ytmp = np.empty((m, npts))
        self.amps = np.empty(m)


def advance_chunk(fields, ws: Workspace, t, tcomp, deltas, kinds, rates, subs,
                  n, h, bc, dt_diff, reaction_safety, amplitude_cap, power_cap,
                  t_horizon, max_steps):
    return _advance(fields, ws.k1, ws.k2, ws.k3, ws.k4, ws.ytmp, ws.amps,
                    t, tcomp, deltas, kinds, rates, subs, n, h, bc,
                    dt_diff, reaction_safety, amplitude_cap, power_cap,
                    t_horizon, max_steps)


def stop_measures(fields, kinds, rates, subs):
    amps = fields.max(axis=1)
    return _stop_measures(amps, kinds, rates, subs)
