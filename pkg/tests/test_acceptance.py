"""Acceptance battery: each test prints one PASS/FAIL line for its criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines; every
check is also asserted so the suite is the gate.
"""

import math

import numpy as np
import pytest

import blowlab as bl
from blowlab import auxiliary as aux
from blowlab import blowup_analysis as ba
from blowlab import msystem as ms
from blowlab import similarity as sim
from blowlab.initial_data import BumpKind, DataCase, make_bump, verify_initial_data
from blowlab.quadrature import quad_gk

from oracles import smoothing_ratio_nested

# measured once with the nested-quadrature oracle and pinned as a regression
# constant: sup over the shrinking-indicator family of the delayed smoothing
# ratio at sigma* = 1 (k=1 -> m=2, delta = lambda = 1)
PINNED_SMOOTHING_SUP = 1.0370217002045397


def _report(num, name, checks):
    ok = all(c[1] for c in checks)
    print(f"[criterion {num:02d}] {name}: {'PASS' if ok else 'FAIL'}")
    for label, good, detail in checks:
        print(f"    - {label}: {'ok' if good else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} failed: " + "; ".join(c[0] for c in checks if not c[1])


def test_criterion_01_homogeneous_oracle(flat_run):
    checks = []
    ref = -np.log(1.0 - flat_run.t)
    mask = (ref > 1e-6) & (flat_run.u_max <= 15.0)
    rel = float(np.max(np.abs(flat_run.u_max[mask] - ref[mask]) / ref[mask]))
    checks.append(("amplitude series vs closed form (rel, u<=15)", rel <= 1e-4,
                   f"max rel err {rel:.3e}"))
    est = ba.estimate_blowup_time(flat_run, window_decades=1)
    checks.append(("T_est in [0.999, 1.001]", 0.999 <= est.T_est <= 1.001,
                   f"T_est {est.T_est:.12f}"))
    checks.append(("R^2 >= 0.9999", est.r_squared >= 0.9999,
                   f"R^2 {est.r_squared:.10f}"))
    checks.append(("|C_typeI_u| <= 0.01", abs(est.C_typeI_u) <= 0.01,
                   f"C_u {est.C_typeI_u:.6f}"))
    _report(1, "homogeneous blow-up oracle", checks)


def test_criterion_02_type_one_law(canon_run_256, canon_run_512):
    checks = []
    params = canon_run_256.model
    grid = canon_run_256.grid
    u0, v0 = make_bump(BumpKind.GAUSS_NEUMANN, 1.0, grid, width=1.4)
    rep = verify_initial_data(u0, v0, params, grid, DataCase.NEUMANN)
    checks.append(("initial data verified admissible", rep.passed,
                   f"min residuals {rep.min_residual_u:.3f}/{rep.min_residual_v:.3f}"))
    est_a = ba.estimate_blowup_time(canon_run_256, window_decades=1)
    est_b = ba.estimate_blowup_time(canon_run_512, window_decades=1)
    checks.append(("R^2 >= 0.999 over final decade (J=256)",
                   est_a.r_squared >= 0.999, f"R^2 {est_a.r_squared:.10f}"))
    checks.append(("R^2 >= 0.999 over final decade (J=512)",
                   est_b.r_squared >= 0.999, f"R^2 {est_b.r_squared:.10f}"))
    finite = all(np.isfinite([est_a.C_typeI_u, est_a.C_typeI_v,
                              est_b.C_typeI_u, est_b.C_typeI_v]))
    checks.append(("type-I constants finite", finite,
                   f"C_u {est_a.C_typeI_u:.5f}/{est_b.C_typeI_u:.5f}, "
                   f"C_v {est_a.C_typeI_v:.5f}/{est_b.C_typeI_v:.5f}"))
    # +-10% stability of the multiplicative constants e^C (the additive C is
    # not time-unit invariant and sits at a structural zero for p=1)
    band = math.log(1.1)
    du = abs(est_a.C_typeI_u - est_b.C_typeI_u)
    dv = abs(est_a.C_typeI_v - est_b.C_typeI_v)
    checks.append(("e^{C_u} stable to +-10% under J doubling", du <= band,
                   f"|dC_u| {du:.2e} vs log(1.1) {band:.3f}"))
    checks.append(("e^{C_v} stable to +-10% under J doubling", dv <= band,
                   f"|dC_v| {dv:.2e}"))
    checks.append(("u- and v-fits agree on T within tolerance",
                   est_a.cross_ok and est_b.cross_ok,
                   f"discrepancies {est_a.cross_discrepancy:.2e}/{est_b.cross_discrepancy:.2e}"))
    _report(2, "type-I law on inhomogeneous data", checks)


def test_criterion_03_single_point_blowup(canon_run_256):
    checks = []
    traj = canon_run_256
    params = traj.model
    est = ba.estimate_blowup_time(traj, window_decades=1)
    radius = ba.blowup_set_radius(traj, est.T_est, eta=0.01)
    checks.append(("blow-up set radius 0 at eta=0.01", radius == 0.0,
                   f"radius {radius}"))
    y = np.exp(-params.q * traj.u_max)
    mask = y <= y.min() * 10.0
    tau = est.T_est - traj.t[mask]
    edge = tau * params.p * np.exp(params.q * traj.probe_series(0, 2.0)[mask])
    center = tau * params.p * np.exp(params.q * traj.u_max[mask])
    checks.append(("edge series below 1e-3 by window end", edge[-1] <= 1e-3,
                   f"final {edge[-1]:.3e}"))
    checks.append(("center series stays above 0.1", float(np.min(center)) >= 0.1,
                   f"min {float(np.min(center)):.4f}"))
    probe = traj.probe_series(0, 2.0)[mask]
    rise = float(probe[-1] - probe[0])
    checks.append(("u(t, R/2) bounded (final-decade rise <= 0.5)", rise <= 0.5,
                   f"rise {rise:.3e}, value {probe[-1]:.3f}"))
    _report(3, "single-point blow-up", checks)


def test_criterion_04_nondegeneracy_roundtrip(canon_run_256, flat_run):
    checks = []
    est = ba.estimate_blowup_time(canon_run_256)
    tau0 = 0.5 * (est.T_est - est.t_a)
    crit = ba.NondegeneracyCriterion(d1=2.0, d0=3.0, eta=0.01, tau0=tau0)
    rep = ba.nondegeneracy_check(canon_run_256, est.T_est, crit)
    checks.append(("qualifying t1 found on the bump run", rep.t1 is not None,
                   f"t1 {rep.t1}, component {rep.component}"))
    checks.append(("prediction 'd0 clear' emitted",
                   rep.predicted_clear_radius == 3.0, f"{rep.predicted_clear_radius}"))
    y = np.exp(-canon_run_256.model.q * canon_run_256.u_max)
    mask = y <= y.min() * 10.0
    d0_probe = canon_run_256.probe_series(0, 3.0)[mask]
    rise = float(d0_probe[-1] - d0_probe[0])
    checks.append(("d0 probe indeed bounded", rise <= 0.5,
                   f"final-decade rise {rise:.3e}"))

    est_flat = ba.estimate_blowup_time(flat_run)
    tau0f = 0.5 * (est_flat.T_est - est_flat.t_a)
    probe_crit = ba.NondegeneracyCriterion(d1=0.5, d0=0.75, eta=1e-8, tau0=tau0f)
    m0 = ba.nondegeneracy_check(flat_run, est_flat.T_est, probe_crit).M0_empirical
    crit_flat = ba.NondegeneracyCriterion(d1=0.5, d0=0.75, eta=0.5 * m0, tau0=tau0f)
    rep_flat = ba.nondegeneracy_check(flat_run, est_flat.T_est, crit_flat)
    checks.append(("no qualifying t1 on the flat run for eta < M0",
                   rep_flat.t1 is None,
                   f"M0 {m0:.4f}, eta {crit_flat.eta:.4f}"))
    _report(4, "nondegeneracy criterion round-trip", checks)


def test_criterion_05_semigroup_suite():
    checks = []
    rng = np.random.default_rng(12)
    grid = np.linspace(-12.0, 12.0, 1601)
    worst_sup = 0.0
    worst_norm = {1: 0.0, 2: 0.0, 4: 0.0}
    weight = sim.GaussianWeight(1.0)
    for _ in range(50):
        knots = np.sort(rng.uniform(-6.0, 6.0, size=9))
        vals = rng.uniform(0.0, 1.0, size=9)
        phi = lambda y, k=knots, v=vals: np.interp(y, k, v)
        sup_phi = float(np.max(vals))
        if sup_phi == 0.0:
            continue
        dens = {}
        for m in (1, 2, 4):
            dv, _ = quad_gk(lambda y, m=m: np.abs(phi(y)) ** m * weight.density(y),
                            -12.0, 12.0, tol=1e-13, breakpoints=knots)
            dens[m] = (dv + 0.5 * weight.tail_mass(-12, 12) * sup_phi**m) ** (1.0 / m)
        for sigma in (0.1, 1.0, 5.0):
            smoothed = sim.ou_semigroup_profile(phi, 1.0, sigma, grid, knots)
            worst_sup = max(worst_sup, float(np.max(np.abs(smoothed))) / sup_phi)
            for m in (1, 2, 4):
                num = sim.weighted_norm(grid, smoothed, 1.0, m, sup_beyond=sup_phi)
                worst_norm[m] = max(worst_norm[m], num.value / dens[m])
    checks.append(("sup-norm contraction <= 1+1e-8 (50 functions)",
                   worst_sup <= 1.0 + 1e-8, f"worst {worst_sup:.12f}"))
    for m in (1, 2, 4):
        checks.append((f"L^{m}_K contraction <= 1+1e-8", worst_norm[m] <= 1.0 + 1e-8,
                       f"worst {worst_norm[m]:.12f}"))

    tri = lambda y: np.interp(y, [-2.0, 0.0, 2.0], [0.0, 1.0, 0.0])
    cross_ok, cross_detail = True, []
    for delta, lam in ((0.5, 1.0), (1.0, 4.0)):
        r = sim.smoothing_ratio(tri, delta, 1.0, 2, 2, lam=lam,
                                breakpoints=(-2.0, 0.0, 2.0), phi_sup=1.0)
        cross_ok &= r <= math.sqrt(lam / delta) + 1e-8
        cross_detail.append(f"({delta},{lam}): {r:.6f} <= {math.sqrt(lam/delta):.4f}")
    checks.append(("cross-weight factor <= sqrt(lam/delta)+1e-8", cross_ok,
                   "; ".join(cross_detail)))

    eig_err = 0.0
    for delta in (0.5, 1.0, 2.0):
        for sigma in (0.1, 1.0, 5.0):
            for th in (-1.3, 0.0, 0.7):
                c = sim.ou_semigroup_apply(lambda y: np.ones_like(y), delta, sigma, th)
                l = sim.ou_semigroup_apply(lambda y: y, delta, sigma, th)
                q2 = sim.ou_semigroup_apply(lambda y: y**2, delta, sigma, th)
                eig_err = max(eig_err, abs(c - 1.0),
                              abs(l - th * math.exp(-0.5 * sigma)),
                              abs(q2 - (th**2 * math.exp(-sigma)
                                        + 2 * delta * (1 - math.exp(-sigma)))))
    checks.append(("eigenfunction identities to 1e-10", eig_err <= 1e-10,
                   f"worst {eig_err:.3e}"))

    knots = np.array([-3.0, -1.0, 2.0])
    phi1 = lambda y: np.interp(y, knots, [0.2, 1.0, 0.1])
    comp_err = 0.0
    for s1, s2 in ((0.5, 1.0), (1.2, 0.3)):
        for th in (-1.0, 0.0, 1.5):
            direct = sim.ou_semigroup_apply(phi1, 1.0, s1 + s2, th, breakpoints=knots)
            inner = lambda y: sim.ou_semigroup_profile(phi1, 1.0, s1,
                                                       np.atleast_1d(y), knots)
            comp_err = max(comp_err, abs(direct - sim.ou_semigroup_apply(inner, 1.0, s2, th)))
    checks.append(("semigroup law to 1e-8", comp_err <= 1e-8, f"worst {comp_err:.3e}"))

    family = (0.1, 0.05, 0.025, 0.0125, 0.00625)
    worst_rel, ratios = 0.0, []
    for w in family:
        phi_v = lambda y, w=w: ((np.asarray(y) >= -w) & (np.asarray(y) <= w)).astype(float)
        phi_s = lambda y, w=w: 1.0 if -w <= y <= w else 0.0
        mine = sim.smoothing_ratio(phi_v, 1.0, 1.0, 1, 2, breakpoints=(-w, w), phi_sup=1.0)
        orc = smoothing_ratio_nested(phi_s, 1.0, 1.0, 1, 2, 1.0, points=(-w, w))
        ratios.append(mine)
        worst_rel = max(worst_rel, abs(mine - orc) / orc)
    checks.append(("delayed smoothing vs nested oracle (1e-4 rel)",
                   worst_rel <= 1e-4, f"worst rel {worst_rel:.3e}"))
    sup_ratio = max(ratios)
    checks.append(("family sup matches pinned regression constant",
                   abs(sup_ratio - PINNED_SMOOTHING_SUP) <= 1e-6,
                   f"sup {sup_ratio:.12f} vs pinned {PINNED_SMOOTHING_SUP:.12f}"))
    _report(5, "weighted-semigroup suite", checks)


def test_criterion_06_eps_chain_and_growth_margins(canon_run_256):
    checks = []
    rng = np.random.default_rng(13)
    worst = 0.0
    total = 0
    for m in (2, 3, 5):
        for _ in range(34 if m != 5 else 32):  # 100 draws total
            eps1 = float(rng.uniform(0.02, 0.98))
            deltas = rng.uniform(0.05, 20.0, size=m)
            chain = ms.epsilon_chain(eps1, deltas)
            inv = np.array([(1.0 / e - 1.0) / d for e, d in zip(chain, deltas)])
            worst = max(worst, float(np.max(np.abs(inv - inv[0]))) / max(abs(inv[0]), 1e-30))
            total += 1
    checks.append((f"chain identity constant to 1e-12 ({total} draws)",
                   worst <= 1e-12, f"worst rel spread {worst:.2e}"))

    spec = ms.MSystemSpec.from_two_component(canon_run_256.model)
    amp = float(np.max(canon_run_256.amps))
    eps1 = ms.find_growth_margin_eps1(canon_run_256, spec, tol=1e-6 * amp)
    checks.append(("eps1 found at or above 2^-10",
                   eps1 is not None and eps1 >= 2.0 ** -10, f"eps1 {eps1}"))
    rep = ms.growth_margin_report(canon_run_256, spec, eps1)
    checks.append(("min growth margin >= -1e-6 * amplitude scale",
                   rep.overall_min >= -1e-6 * amp,
                   f"min {rep.overall_min:.3e}, scale {amp:.1f}"))
    _report(6, "eps-chain and growth margins", checks)


def test_criterion_07_power_exponents(power_run, power_run_m3):
    checks = []
    alphas = ba.power_rate_exponents([3.0, 3.0])
    fits = [ba.estimate_power_blowup(power_run.t, power_run.amps[:, i],
                                     alpha_guess=1.0, amp_window=(1e3, 1e6))
            for i in range(2)]
    for i, fit in enumerate(fits):
        rel = abs(fit.alpha - alphas[i]) / alphas[i]
        checks.append((f"m=2 cubic exponent component {i} within 10%",
                       rel <= 0.10, f"alpha {fit.alpha:.5f} vs {alphas[i]} ({rel:.2%})"))
    alpha3 = ba.power_rate_exponents([2.0, 2.0, 2.0])[0]
    fit3 = ba.estimate_power_blowup(power_run_m3.t, power_run_m3.amps[:, 0],
                                    alpha_guess=1.3, amp_window=(1e2, 1e6))
    rel3 = abs(fit3.alpha - alpha3) / alpha3
    checks.append(("m=3 quadratic exponent within 5%", rel3 <= 0.05,
                   f"alpha {fit3.alpha:.6f} vs {alpha3} ({rel3:.2%})"))
    _report(7, "power-system exponents", checks)


def test_criterion_08_sign_functional_suite(canon_run_256):
    checks = []
    cfg0 = aux.AuxiliaryConfig(rho0=2.0, gamma=0.25, gamma_bar=0.125)
    ell = cfg0.rho2 - cfg0.rho1
    c_l, c1_l, _ = aux.cutoff(cfg0.rho1, cfg0)
    c_m, c1_m, _ = aux.cutoff(0.5 * (cfg0.rho1 + cfg0.rho2), cfg0)
    c_q, _, _ = aux.cutoff(cfg0.rho1 + 0.25 * ell, cfg0)
    xi_mid = aux.cutoff_shape_term(0.5 * (cfg0.rho1 + cfg0.rho2), cfg0, n=1)
    analytic = max(abs(c_l), abs(c1_l), abs(c_m - 1.0), abs(c1_m),
                   abs(c_q - 0.5), abs(xi_mid - 2.0 * math.pi**2 / ell**2))
    checks.append(("cutoff/shape-term analytic identities to 1e-12",
                   analytic <= 1e-12, f"worst {analytic:.2e}"))
    integral, _ = quad_gk(lambda r: aux.cutoff(r, cfg0)[0], cfg0.rho1, cfg0.rho2,
                          tol=1e-14)
    checks.append(("cutoff integral equals half the annulus width to 1e-12",
                   abs(integral - ell / 2.0) <= 1e-12,
                   f"err {abs(integral - ell/2.0):.2e}"))

    traj = canon_run_256
    params = traj.model
    est = ba.estimate_blowup_time(traj)
    window = aux.default_late_window(traj)
    bounds = aux.measure_ratio_bounds(traj, window, (cfg0.rho1, cfg0.rho2),
                                      T_est=est.T_est)
    gamma, gamma_bar = aux.select_gamma(bounds, params.p, params.q)
    cfg1 = aux.AuxiliaryConfig(rho0=2.0, gamma=gamma, gamma_bar=gamma_bar)
    first = next(s for s in traj.snapshots() if s.t >= window[0])
    eps = aux.select_epsilon(first, traj.grid, cfg1)
    checks.append(("halving ladder finds eps", eps is not None,
                   f"gamma {gamma}, eps {eps}"))
    cfg2 = aux.AuxiliaryConfig(rho0=2.0, gamma=gamma, gamma_bar=gamma_bar, eps=eps)
    rep = aux.monitor_sign_functionals(traj, cfg2, window)
    amp = float(np.max(traj.amps))
    tol_j = 1e-6 * amp
    checks.append(("max sign functionals <= 1e-6 * amplitude scale",
                   max(rep.overall_max_u, rep.overall_max_v) <= tol_j,
                   f"max_u {rep.overall_max_u:.3e}, max_v {rep.overall_max_v:.3e}"))
    checks.append(("integrated slope bound at every late checkpoint",
                   bool(np.all(rep.identity_ok)),
                   f"{int(np.sum(rep.identity_ok))}/{rep.identity_ok.size} checkpoints"))
    _report(8, "sign-functional suite", checks)


def test_criterion_09_tail_integral():
    checks = []
    worst = 0.0
    for x in (0.5, 1.0, 2.0, 5.0, 10.0):
        closed = ba.tail_time_integral(x)
        quadr = ba.tail_time_integral_quadrature(x)
        worst = max(worst, abs(closed - quadr))
    checks.append(("closed form vs quadrature to 1e-10", worst <= 1e-10,
                   f"worst {worst:.2e}"))
    xs = np.linspace(1.0, 21.0, 1000)
    ratios = np.array([ba.tail_time_integral(x) * math.exp(0.5 * x) for x in xs])
    sup = float(np.max(ratios))
    # stated bound constant C=3; the true sup on X >= 1 is H(1)e^{1/2} = 3.0759...,
    # attained at X=1, so this check is expected to fail (see decisions ledger)
    checks.append(("H(X) <= 3 e^{-X/2} on a 1000-point scan of X >= 1",
                   sup <= 3.0, f"measured sup {sup:.6f} at X={xs[int(np.argmax(ratios))]:.3f}"))
    _report(9, "remaining-time integral", checks)


def test_criterion_09b_tail_integral_true_constant():
    # companion regression for the honest constant: the scan sup equals
    # H(1)e^{1/2} and C = 3.08 covers the whole range X >= 1
    xs = np.linspace(1.0, 21.0, 1000)
    ratios = np.array([ba.tail_time_integral(x) * math.exp(0.5 * x) for x in xs])
    sup = float(np.max(ratios))
    expected = ba.tail_time_integral(1.0) * math.exp(0.5)
    assert abs(sup - expected) <= 1e-12
    assert sup <= 3.08
    print(f"[criterion 09b] true scan constant: PASS (sup {sup:.6f} = H(1)e^(1/2))")


def test_criterion_10_simultaneity_and_monotonicity(flat_run, canon_run_256,
                                                    canon_run_512, power_run,
                                                    power_run_m3):
    checks = []
    for name, traj in (("flat", flat_run), ("bump J=256", canon_run_256),
                       ("bump J=512", canon_run_512)):
        params = traj.model
        cap = traj.config.amplitude_cap
        qu = params.q * traj.u_max[-1]
        pv = params.p * traj.v_max[-1]
        checks.append((f"{name}: both components past half cap at stop",
                       qu >= 0.5 * cap and pv >= 0.5 * cap,
                       f"qu {qu:.2f}, pv {pv:.2f}, cap {cap}"))
        amp = float(np.max(traj.amps))
        mono = (np.all(np.diff(traj.u_max) >= -1e-8 * amp)
                and np.all(np.diff(traj.v_max) >= -1e-8 * amp))
        checks.append((f"{name}: amplitudes nondecreasing within 1e-8*amp",
                       bool(mono), f"amp scale {amp:.1f}"))
    for name, traj in (("power m=2", power_run), ("power m=3", power_run_m3)):
        amp = float(np.max(traj.amps))
        mono = all(np.all(np.diff(traj.amps[:, i]) >= -1e-8 * amp)
                   for i in range(traj.m))
        checks.append((f"{name}: componentwise amplitudes nondecreasing",
                       bool(mono), f"amp scale {amp:.2e}"))
    _report(10, "simultaneity and monotonicity", checks)
