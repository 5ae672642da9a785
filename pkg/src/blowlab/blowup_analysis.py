"""Blow-up time estimation, rate diagnostics and the nondegeneracy check.

Under type-I behaviour e^{-q u_max(t)} is asymptotically linear in t, so the
blow-up time comes from a least-squares line through the late samples; its
root is authoritative (the solver stop time is not, being polluted by the
cap).  The remaining operations measure rate constants, estimate the blow-up
set from probe decay, and evaluate the local smallness criterion that rules
out blow-up beyond a given radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import StopReason
from .quadrature import quad_gk
from .solver import Trajectory

R2_TYPE_ONE_FLOOR = 0.99  # below this the exponential type-I model is suspect
MIN_LATE_SAMPLES = 50


class InsufficientSamplesError(ValueError):
    pass


class WindowNotCoveredError(ValueError):
    pass


@dataclass(frozen=True)
class BlowupEstimate:
    T_est: float
    t_a: float
    t_b: float
    slope: float
    intercept: float
    r_squared: float
    C_typeI_u: float
    C_typeI_v: float
    T_est_v: float
    cross_discrepancy: float
    cross_ok: bool
    type_one: bool
    n_window: int


def _linear_root_fit(t: np.ndarray, y: np.ndarray):
    """Least-squares line y ~ a - b t, returned as (root, slope_b, r_squared).

    The fit is centered in t for conditioning; the root is where the line
    crosses zero, i.e. the extrapolated time at which y vanishes.
    """
    tc = t - t.mean()
    beta, alpha = np.polyfit(tc, y, 1)
    resid = y - (alpha + beta * tc)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    b = -beta
    root = t.mean() + alpha / b if b != 0 else math.inf
    return root, b, alpha, r2


def _decade_window(y: np.ndarray, decades: float) -> np.ndarray:
    return y <= float(np.min(y)) * 10.0**decades


def estimate_blowup_time(traj: Trajectory, window_decades: int = 1) -> BlowupEstimate:
    """Fit e^{-q u_max} linearly in t over its last ``window_decades`` decades.

    Requires an amplitude-cap stop with at least 50 samples past half cap.
    A nonpositive slope or a degraded fit does not raise: it clears the
    ``type_one`` flag, since the type-I property itself is what is being
    probed.
    """
    params = traj.model
    p, q = params.p, params.q
    if traj.stop is not StopReason.AMPLITUDE_CAP:
        raise InsufficientSamplesError(f"run stopped by {traj.stop.value}, not the amplitude cap")
    cap = traj.config.amplitude_cap
    if int(np.sum(q * traj.u_max >= 0.5 * cap)) < MIN_LATE_SAMPLES:
        raise InsufficientSamplesError("fewer than 50 samples past half the amplitude cap")

    y = np.exp(-q * traj.u_max)
    mask = _decade_window(y, window_decades)
    t_w, y_w = traj.t[mask], y[mask]
    T_u, b_u, a_u, r2 = _linear_root_fit(t_w, y_w)

    z = np.exp(-p * traj.v_max)
    mask_v = _decade_window(z, window_decades)
    T_v, b_v, _, _ = _linear_root_fit(traj.t[mask_v], z[mask_v])

    type_one = b_u > 0 and b_v > 0 and r2 >= R2_TYPE_ONE_FLOOR and T_u > t_w[-1]

    if type_one:
        tau = T_u - t_w
        C_u = float(np.max(q * traj.u_max[mask] + np.log(tau)))
        tau_v = np.maximum(T_u - traj.t[mask_v], np.finfo(float).tiny)
        C_v = float(np.max(p * traj.v_max[mask_v] + np.log(tau_v)))
    else:
        C_u = C_v = math.nan

    cross = abs(T_u - T_v)
    cross_ok = cross <= 1e-2 * max(T_u - float(t_w[0]), np.finfo(float).tiny)
    return BlowupEstimate(T_est=float(T_u), t_a=float(t_w[0]), t_b=float(t_w[-1]),
                          slope=float(b_u), intercept=float(a_u), r_squared=float(r2),
                          C_typeI_u=C_u, C_typeI_v=C_v, T_est_v=float(T_v),
                          cross_discrepancy=float(cross), cross_ok=bool(cross_ok),
                          type_one=bool(type_one), n_window=int(t_w.size))


def blowup_set_radius(traj: Trajectory, T_est: float, eta: float = 0.01,
                      window_decades: int = 1) -> float:
    """Largest probe radius whose rescaled amplitude stays above eta.

    Evaluates the lim-inf of (T_est - t) * p * e^{q u(t, d)} over the fit
    window at every probe radius (origin excluded); radii where it drops
    below eta are classified as clear of blow-up.
    """
    params = traj.model
    p, q = params.p, params.q
    y = np.exp(-q * traj.u_max)
    mask = _decade_window(y, window_decades) & (traj.t < T_est)
    if not np.any(mask):
        return 0.0
    tau = T_est - traj.t[mask]
    best = 0.0
    for k in range(traj.probe_radii.size):
        series = tau * p * np.exp(q * traj.probes[mask, 0, k])
        if float(np.min(series)) >= eta:
            best = max(best, float(traj.probe_radii[k]))
    return best


@dataclass(frozen=True)
class NondegeneracyCriterion:
    d1: float
    d0: float
    eta: float
    tau0: float
    M0: float = math.inf

    def __post_init__(self):
        if not (0.0 < self.d1 < self.d0):
            raise ValueError("need 0 < d1 < d0")
        if not (self.eta > 0 and self.tau0 > 0):
            raise ValueError("eta and tau0 must be positive")


@dataclass(frozen=True)
class NondegeneracyReport:
    criterion: NondegeneracyCriterion
    t1: Optional[float]          # earliest qualifying time, None if absent
    component: Optional[str]     # 'u' or 'v'
    predicted_clear_radius: Optional[float]
    M0_empirical: float          # sup of rescaled transformed fields at probes >= d1
    window: tuple


def nondegeneracy_check(traj: Trajectory, T_est: float,
                        crit: NondegeneracyCriterion) -> NondegeneracyReport:
    """Search the late window for a time at which (T_est-t) U(t, d1) <= eta.

    A hit predicts that d0 is not a blow-up point; the empirical sup of the
    rescaled transformed fields at all probes >= d1 is reported alongside as
    the measured type-I constant.
    """
    params = traj.model
    p, q = params.p, params.q
    k1 = int(np.argmin(np.abs(traj.probe_radii - crit.d1)))
    if abs(traj.probe_radii[k1] - crit.d1) > 2.0 * traj.grid.h:
        raise WindowNotCoveredError(f"no probe near d1={crit.d1}")
    t_lo = T_est - crit.tau0
    if traj.t[0] > t_lo:
        raise WindowNotCoveredError("samples do not reach back to T_est - tau0")
    mask = (traj.t >= t_lo) & (traj.t < T_est)
    if not np.any(mask):
        raise WindowNotCoveredError("no samples inside the criterion window")
    t_w = traj.t[mask]
    tau = T_est - t_w
    U1 = p * np.exp(q * traj.probes[mask, 0, k1])
    V1 = q * np.exp(p * traj.probes[mask, 1, k1])

    t1 = component = None
    hit_u = np.nonzero(tau * U1 <= crit.eta)[0]
    hit_v = np.nonzero(tau * V1 <= crit.eta)[0]
    iu = hit_u[0] if hit_u.size else None
    iv = hit_v[0] if hit_v.size else None
    if iu is not None or iv is not None:
        if iv is None or (iu is not None and iu <= iv):
            t1, component = float(t_w[iu]), "u"
        else:
            t1, component = float(t_w[iv]), "v"

    M0 = 0.0
    for k in range(traj.probe_radii.size):
        if traj.probe_radii[k] < crit.d1 - 1e-12:
            continue
        M0 = max(M0,
                 float(np.max(tau * p * np.exp(q * traj.probes[mask, 0, k]))),
                 float(np.max(tau * q * np.exp(p * traj.probes[mask, 1, k]))))

    return NondegeneracyReport(criterion=crit, t1=t1, component=component,
                               predicted_clear_radius=crit.d0 if t1 is not None else None,
                               M0_empirical=M0, window=(float(t_lo), float(traj.t[-1])))


def power_rate_exponents(p_list: Sequence):
    """Blow-up rate exponents of the cyclic power system u_i' ~ u_{i+1}^{p_i}.

    alpha_i = (1 + p_i + sum_{l=i+1}^{m+i-2} p_i ... p_l) / (p_1 ... p_m - 1)
    with cyclic index convention; the sum is empty for m = 2.  Exact for
    Fraction inputs.
    """
    m = len(p_list)
    if m < 2:
        raise ValueError("need at least two components")
    for pi in p_list:
        if not pi > 1:
            raise ValueError("all exponents must exceed 1")
    denom = 1
    for pi in p_list:
        denom = denom * pi
    denom = denom - 1
    alphas = []
    for i in range(m):
        total = 1 + p_list[i]
        prod = p_list[i]
        for l in range(i + 1, m + i - 1):
            prod = prod * p_list[l % m]
            total = total + prod
        alphas.append(total / denom)
    return alphas


@dataclass(frozen=True)
class PowerBlowupEstimate:
    T_est: float
    alpha: float
    r_squared: float
    n_window: int


def estimate_power_blowup(times: np.ndarray, amps: np.ndarray,
                          alpha_guess: float = 1.0,
                          amp_window: tuple = (1e2, 1e5)) -> PowerBlowupEstimate:
    """Blow-up time and rate exponent for power-type growth amps ~ C (T-t)^-alpha.

    Nonlinear least squares of log(amps) against log C - alpha log(T - t),
    with T parametrized as (last window time) + exp(s) so it stays beyond the
    data.  The amplitude window should exclude the final samples where T - t
    falls below time resolution.
    """
    from scipy.optimize import least_squares

    times = np.asarray(times, dtype=float)
    amps = np.asarray(amps, dtype=float)
    mask = (amps >= amp_window[0]) & (amps <= amp_window[1])
    if int(np.sum(mask)) < 10:
        raise InsufficientSamplesError("fewer than 10 samples in the amplitude window")
    t_w, a_w = times[mask], amps[mask]
    ly = np.log(a_w)
    t_end = float(t_w[-1])
    back = t_end - t_w  # >= 0, zero at the window end

    # initial T - t_end from the pure power law through the last two samples
    r = (a_w[-2] / a_w[-1]) ** (1.0 / alpha_guess)
    gap = float(t_w[-1] - t_w[-2])
    tau_end0 = max(gap * r / max(1.0 - r, 1e-12), 1e-3 * gap)

    def resid(x):
        logC, alpha, s = x
        return ly - (logC - alpha * np.log(back + math.exp(s)))

    x0 = np.array([float(ly[-1]), alpha_guess, math.log(tau_end0)])
    fit = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15)
    logC, alpha, s = fit.x
    T = t_end + math.exp(s)
    res = resid(fit.x)
    r2 = 1.0 - float(np.sum(res**2)) / float(np.sum((ly - ly.mean()) ** 2))
    return PowerBlowupEstimate(T_est=float(T), alpha=float(alpha),
                               r_squared=float(r2), n_window=int(t_w.size))


def tail_time_integral(x: float) -> float:
    """Closed form of the remaining-time integral: integral_x^inf ds/(e^{s/2}-1)
    equals -2 log(1 - e^{-x/2}); diverges as x -> 0+."""
    if not x > 0:
        raise ValueError("the integral diverges for x <= 0")
    return -2.0 * math.log1p(-math.exp(-0.5 * x))


def tail_time_integral_quadrature(x: float, tol: float = 1e-12,
                                  span: float = 200.0) -> float:
    """Direct quadrature companion of :func:`tail_time_integral` (dual route)."""
    if not x > 0:
        raise ValueError("the integral diverges for x <= 0")

    def integrand(s):
        return 1.0 / np.expm1(0.5 * s)

    value, _ = quad_gk(integrand, x, x + span, tol=tol)
    return value + 2.0 * math.exp(-0.5 * (x + span))  # analytic remainder bound ~ tail


def pointwise_type_one_bound(x: float, c: float, T: float, t: float) -> bool:
    """Check the integrated lower-rate inequality H(x) >= c (T - t)."""
    return tail_time_integral(x) >= c * (T - t)


def combine_amplitudes(u, v, p: float, q: float, ordering: str = "qu+pv"):
    """The combined amplitude the rate inequality is stated for.

    Both orderings are exposed; qu+pv is the default used by the sign
    inequality driving the pointwise bound.
    """
    if ordering == "qu+pv":
        return q * np.asarray(u) + p * np.asarray(v)
    if ordering == "pu+qv":
        return p * np.asarray(u) + q * np.asarray(v)
    raise ValueError(f"unknown ordering {ordering!r}")
