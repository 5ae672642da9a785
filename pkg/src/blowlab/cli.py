"""Experiment orchestration: run, sweep, analyze and semigroup-test commands.

Configuration is strict-schema JSON (unknown keys are rejected, defaults are
documented in the shipped schema file); outputs are deterministic CSV time
series plus versioned JSON reports.  Exit codes: 0 success, 1 runtime
failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from importlib import resources
from itertools import product

import jsonschema
import numpy as np

from . import auxiliary, blowup_analysis, msystem, reports, similarity
from .core import FieldState, ModelParams, StopReason, make_grid
from .initial_data import BumpKind, DataCase, make_bump, verify_initial_data
from .msystem import MSystemSpec
from .reports import atomic_write_json, atomic_write_text, load_fixture, model_from_dict
from .solver import Trajectory, integrate

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    pass


@lru_cache(maxsize=1)
def _schema() -> dict:
    text = resources.files("blowlab.schemas").joinpath("run_config.schema.json").read_text()
    return json.loads(text)


def _fill_defaults(instance, schema):
    """Insert documented defaults into a validated instance (recursive)."""
    if "oneOf" in schema:
        for option in schema["oneOf"]:
            validator = jsonschema.Draft202012Validator(option)
            if validator.is_valid(instance):
                return _fill_defaults(instance, option)
        return instance
    if schema.get("type") == "object" and isinstance(instance, dict):
        for key, sub in schema.get("properties", {}).items():
            if key not in instance and "default" in sub:
                instance[key] = copy.deepcopy(sub["default"])
            if key in instance:
                instance[key] = _fill_defaults(instance[key], sub)
        return instance
    if schema.get("type") == "array" and isinstance(instance, list):
        item_schema = schema.get("items")
        if item_schema:
            return [_fill_defaults(x, item_schema) for x in instance]
    return instance


def parse_config(text: str) -> dict:
    """Validate a JSON run configuration and fill in documented defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    validator = jsonschema.Draft202012Validator(_schema())
    errors = list(validator.iter_errors(raw))
    if errors:
        # descend into oneOf branches ourselves, skipping the discriminator
        # mismatches of branches not taken so the real defect is reported
        best = max(errors, key=jsonschema.exceptions.relevance)
        while best.context:
            sub = [e for e in best.context
                   if not (e.validator == "const" and e.json_path.endswith(".kind"))]
            best = max(sub or best.context, key=jsonschema.exceptions.relevance)
        raise ConfigError(f"config invalid at {best.json_path}: {best.message}")
    return _fill_defaults(raw, _schema())


def serialize_config(config: dict) -> str:
    return reports.dump_json(config)


def _build_initial(config: dict, grid, model, n: int, m: int):
    init = config.get("initial", {"kind": "zero"})
    kind = init["kind"]
    if kind == "zero":
        u0 = np.zeros(grid.J + 1)
        return [u0.copy() for _ in range(m)]
    if kind == "constant":
        u0 = np.full(grid.J + 1, float(init["value"]))
        return [u0.copy() for _ in range(m)]
    if kind == "bump":
        u0, v0 = make_bump(BumpKind(init["shape"]), float(init["amplitude"]), grid,
                           width=init.get("width"),
                           shoulder_start=float(init.get("shoulder_start", 0.7)))
        if init.get("verify") is not None:
            if not isinstance(model, ModelParams):
                raise ConfigError("initial.verify requires a two-component model")
            report = verify_initial_data(u0, v0, model, grid, DataCase(init["verify"]),
                                         eps=float(init.get("verify_eps", 0.1)))
            if not report.passed:
                raise ConfigError(f"initial data fail verification: {report}")
        return [u0] + [v0.copy() if i else v0 for i in range(1, m)]
    if kind == "fixture":
        path = init["path"]
        if not os.path.exists(path):
            raise ConfigError(f"fixture path does not exist: {path}")
        u0, v0, fgrid, fmodel, _ = load_fixture(path)
        if fgrid.J != grid.J or abs(fgrid.R - grid.R) > 1e-12 * grid.R:
            raise ConfigError(f"fixture grid (R={fgrid.R}, J={fgrid.J}) does not match config")
        if m != 2:
            raise ConfigError("fixtures are two-component")
        return [u0, v0]
    raise ConfigError(f"unknown initial kind {kind!r}")


def build_run(config: dict):
    """Instantiate (model, n, R, grid, solver_config, initial_fields)."""
    model, n, R = model_from_dict(config["model"])
    grid = make_grid(R, int(config["grid"]["J"]))
    cfg = reports.solver_config_from_dict(config.get("solver", {}))
    m = model.m if isinstance(model, MSystemSpec) else 2
    fields = _build_initial(config, grid, model, n, m)
    return model, n, R, grid, cfg, fields


def _analysis_report(kind: str, manifest: dict, payload: dict) -> dict:
    return {"schema_version": reports.SCHEMA_VERSION, "kind": kind,
            "inputs": {"series_sha256": manifest["series_sha256"]}, **payload}


def _estimate(traj: Trajectory, window_decades: int = 1):
    return blowup_analysis.estimate_blowup_time(traj, window_decades)


def run_analyses(traj: Trajectory, n: int, analyses: list, outdir: str,
                 manifest: dict) -> list:
    written = []
    est = None
    blowup_kinds = {"type_one", "blowup_set", "nondegeneracy", "similarity",
                    "jmonitor", "jimonitor"}
    for i, a in enumerate(analyses):
        kind = a["kind"]
        name = f"reports/{i:02d}_{kind}.json"
        path = os.path.join(outdir, name)
        if traj.stop is not StopReason.AMPLITUDE_CAP and kind in blowup_kinds:
            atomic_write_json(path, _analysis_report(kind, manifest, {
                "skipped": f"run stopped by {traj.stop.value}; blow-up analyses need an amplitude-cap stop"}))
            written.append(name)
            continue
        if kind == "type_one":
            est = _estimate(traj, int(a["window_decades"]))
            payload = {k: getattr(est, k) for k in (
                "T_est", "t_a", "t_b", "slope", "intercept", "r_squared",
                "C_typeI_u", "C_typeI_v", "T_est_v", "cross_discrepancy",
                "cross_ok", "type_one", "n_window")}
        elif kind == "blowup_set":
            est = est or _estimate(traj, int(a["window_decades"]))
            radius = blowup_analysis.blowup_set_radius(
                traj, est.T_est, float(a["eta"]), int(a["window_decades"]))
            payload = {"T_est": est.T_est, "eta": a["eta"], "blowup_set_radius": radius}
        elif kind == "nondegeneracy":
            est = est or _estimate(traj)
            tau0 = a["tau0"] if a.get("tau0") is not None else 0.5 * (est.T_est - est.t_a)
            crit = blowup_analysis.NondegeneracyCriterion(
                d1=float(a["d1"]), d0=float(a["d0"]), eta=float(a["eta"]), tau0=float(tau0))
            rep = blowup_analysis.nondegeneracy_check(traj, est.T_est, crit)
            payload = {"T_est": est.T_est, "d1": crit.d1, "d0": crit.d0,
                       "eta": crit.eta, "tau0": crit.tau0, "t1": rep.t1,
                       "component": rep.component,
                       "predicted_clear_radius": rep.predicted_clear_radius,
                       "M0_empirical": rep.M0_empirical, "window": list(rep.window)}
        elif kind == "similarity":
            est = est or _estimate(traj)
            params = traj.model
            delta_bar = max(params.delta1, params.delta2)
            payload = {"T_est": est.T_est, "delta_bar": delta_bar, "centers": []}
            for d in a["centers"]:
                frames = [similarity.to_similarity(
                    FieldState(t=s.t, u=s.fields[0], v=s.fields[1]),
                    params, traj.grid, est.T_est, float(d),
                    d_inner=float(a.get("d_inner", 0.0)))
                    for s in traj.snapshots() if s.t < est.T_est]
                sig, wn, zn = similarity.decay_norm_series(frames, delta_bar)
                entry = {"d": d, "sigma": sig.tolist(),
                         "weighted_w": wn.tolist(), "weighted_z": zn.tolist()}
                if a.get("dump_frames"):
                    entry["frames"] = [
                        {"sigma": f.sigma, "theta": f.theta.tolist(),
                         "w": f.w.tolist(), "z": f.z.tolist()} for f in frames]
                payload["centers"].append(entry)
        elif kind == "jmonitor":
            est = est or _estimate(traj)
            params = traj.model
            window = auxiliary.default_late_window(traj)
            rho0 = float(a["rho0"])
            annulus = (rho0 / 4.0, rho0 / 2.0)
            bounds = auxiliary.measure_ratio_bounds(traj, window, annulus,
                                                    T_est=est.T_est)
            if a.get("gamma") is not None:
                gamma = float(a["gamma"])
                gamma_bar = gamma * params.p / params.q
            else:
                gamma, gamma_bar = auxiliary.select_gamma(bounds, params.p, params.q)
            cfg0 = auxiliary.AuxiliaryConfig(rho0=rho0, gamma=gamma, gamma_bar=gamma_bar)
            if a.get("eps") is not None:
                eps = float(a["eps"])
            else:
                first = next(s for s in traj.snapshots() if s.t >= window[0])
                eps = auxiliary.select_epsilon(first, traj.grid, cfg0)
            payload = {"rho0": rho0, "gamma": gamma, "gamma_bar": gamma_bar,
                       "eps": eps, "ratio_bounds": {"C1p": bounds.C1p, "C2p": bounds.C2p},
                       "window": list(window)}
            if eps is None:
                payload["note"] = "no admissible eps on the halving ladder"
            else:
                cfg1 = auxiliary.AuxiliaryConfig(rho0=rho0, gamma=gamma,
                                                 gamma_bar=gamma_bar, eps=eps)
                rep = auxiliary.monitor_sign_functionals(traj, cfg1, window)
                payload.update({
                    "checkpoint_t": rep.checkpoint_t.tolist(),
                    "max_g_u": rep.max_g_u.tolist(),
                    "max_g_v": rep.max_g_v.tolist(),
                    "identity_ok": rep.identity_ok.tolist(),
                    "overall_max_u": rep.overall_max_u,
                    "overall_max_v": rep.overall_max_v})
        elif kind == "jimonitor":
            spec = (traj.model if isinstance(traj.model, MSystemSpec)
                    else MSystemSpec.from_two_component(traj.model))
            eps1 = a.get("eps1")
            if eps1 is None:
                eps1 = msystem.find_growth_margin_eps1(traj, spec, tol=float(a["tol"]))
            payload = {"eps1": eps1, "tol": a["tol"]}
            if eps1 is None:
                payload["note"] = "no admissible eps1 on the halving ladder"
            else:
                rep = msystem.growth_margin_report(traj, spec, float(eps1))
                payload.update({"eps": list(rep.eps), "t0": rep.t0,
                                "burst_t": rep.burst_t.tolist(),
                                "min_margin": rep.min_margin.tolist(),
                                "overall_min": rep.overall_min})
        else:
            raise ConfigError(f"unknown analysis kind {kind!r}")
        atomic_write_json(path, _analysis_report(kind, manifest, payload))
        written.append(name)
    return written


def execute_run(config: dict, outdir: str) -> dict:
    """Run one configuration and write all artifacts; returns a summary."""
    model, n, R, grid, cfg, fields = build_run(config)
    if isinstance(model, ModelParams):
        traj = integrate(model, cfg, FieldState(t=0.0, u=fields[0], v=fields[1]), grid)
    else:
        traj = msystem.integrate_msystem(model, grid, n, cfg, fields)
    manifest = reports.save_trajectory(outdir, traj, n, R,
                                       series_format=config["output"]["format"])
    analyses = config.get("analyses", [])
    if analyses and not isinstance(model, ModelParams):
        applicable = [a for a in analyses if a["kind"] == "jimonitor"]
        if len(applicable) != len(analyses):
            raise ConfigError("m-component runs support only the jimonitor analysis")
        analyses = applicable
    written = run_analyses(traj, n, analyses, outdir, manifest)
    summary = {"stop": traj.stop.value, "t_stop": traj.t_stop,
               "total_steps": traj.total_steps, "outdir": outdir,
               "series_sha256": manifest["series_sha256"], "reports": written}
    atomic_write_json(os.path.join(outdir, "summary.json"), summary)
    return summary


def _error_json(exc: Exception) -> str:
    return reports.dump_json({"error": {"type": type(exc).__name__, "message": str(exc)}})


def cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            config = parse_config(fh.read())
    except (OSError, ConfigError) as exc:
        sys.stdout.write(_error_json(exc))
        return EXIT_CONFIG
    try:
        summary = execute_run(config, args.out)
    except ConfigError as exc:
        sys.stdout.write(_error_json(exc))
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure: surface structured error
        sys.stdout.write(_error_json(exc))
        return EXIT_RUNTIME
    sys.stdout.write(reports.dump_json(summary))
    return EXIT_OK


def _set_path(config: dict, path: str, value):
    keys = path.split(".")
    node = config
    for key in keys[:-1]:
        if key not in node:
            raise ConfigError(f"sweep axis path not found: {path}")
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError(f"sweep axis path not found: {path}")
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"sweep axes must be numeric (path {path})")
    node[keys[-1]] = value


def _run_cell(payload):
    index, config, outdir = payload
    row = {"cell": index, "stop": "", "t_stop": "", "T_est": "", "r_squared": "",
           "blowup_set_radius": "", "error": ""}
    try:
        summary = execute_run(config, outdir)
        row["stop"] = summary["stop"]
        row["t_stop"] = repr(summary["t_stop"])
        traj, _, _ = reports.load_trajectory(outdir)
        if traj.stop is StopReason.AMPLITUDE_CAP and isinstance(traj.model, ModelParams):
            try:
                est = blowup_analysis.estimate_blowup_time(traj)
                row["T_est"] = repr(est.T_est)
                row["r_squared"] = repr(est.r_squared)
                row["blowup_set_radius"] = repr(
                    blowup_analysis.blowup_set_radius(traj, est.T_est))
            except blowup_analysis.InsufficientSamplesError as exc:
                row["error"] = str(exc)
    except Exception as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(args) -> int:
    try:
        with open(args.config) as fh:
            sweep_cfg = json.load(fh)
        template = sweep_cfg.get("template")
        axes = sweep_cfg.get("axes", [])
        if template is None or not axes:
            raise ConfigError("sweep config needs 'template' and nonempty 'axes'")
        parse_config(json.dumps(template))  # validate the template
        for ax in axes:
            if not isinstance(ax.get("path"), str) or not isinstance(ax.get("values"), list):
                raise ConfigError("each axis needs a 'path' and a list of 'values'")
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        sys.stdout.write(_error_json(exc))
        return EXIT_CONFIG

    try:
        cells = []
        for index, combo in enumerate(product(*(ax["values"] for ax in axes))):
            config = parse_config(json.dumps(template))
            for ax, value in zip(axes, combo):
                _set_path(config, ax["path"], value)
            cells.append((index, combo, config))
    except ConfigError as exc:
        sys.stdout.write(_error_json(exc))
        return EXIT_CONFIG

    payloads = [(i, cfg, os.path.join(args.out, f"cell_{i:04d}")) for i, _, cfg in cells]
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            rows = list(pool.map(_run_cell, payloads))
    else:
        rows = [_run_cell(p) for p in payloads]
    rows.sort(key=lambda r: r["cell"])

    axis_names = [ax["path"] for ax in axes]
    header = ["cell"] + axis_names + ["stop", "t_stop", "T_est", "r_squared",
                                      "blowup_set_radius", "error"]
    lines = [",".join(header)]
    for (index, combo, _), row in zip(cells, rows):
        vals = [str(index)] + [repr(v) for v in combo]
        vals += [str(row[k]) for k in ("stop", "t_stop", "T_est", "r_squared",
                                       "blowup_set_radius", "error")]
        lines.append(",".join(vals))
    atomic_write_text(os.path.join(args.out, "summary.csv"), "\n".join(lines) + "\n")
    nerr = sum(1 for r in rows if r["error"])
    sys.stdout.write(reports.dump_json({"cells": len(rows), "errors": nerr,
                                        "summary": os.path.join(args.out, "summary.csv")}))
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        analyses = raw.get("analyses")
        if not isinstance(analyses, list) or not analyses:
            raise ConfigError("analyze config needs a nonempty 'analyses' list")
        shell = parse_config(json.dumps({
            "model": {"kind": "two_component", "delta1": 1, "delta2": 1,
                      "p": 1, "q": 1, "R": 1},
            "grid": {"J": 8}, "analyses": analyses}))
        analyses = shell["analyses"]
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        sys.stdout.write(_error_json(exc))
        return EXIT_CONFIG
    try:
        traj, n, _R = reports.load_trajectory(args.run_dir)
        series = os.path.join(args.run_dir, "samples.csv")
        if not os.path.exists(series):
            series = os.path.join(args.run_dir, "samples.json")
        manifest = {"series_sha256": reports.file_sha256(series)}
        written = run_analyses(traj, n, analyses, args.out, manifest)
    except Exception as exc:
        sys.stdout.write(_error_json(exc))
        return EXIT_RUNTIME
    sys.stdout.write(reports.dump_json({"reports": written}))
    return EXIT_OK


def _piecewise_linear_family(rng, count):
    funcs = []
    for _ in range(count):
        knots = np.sort(rng.uniform(-6.0, 6.0, size=9))
        vals = rng.uniform(0.0, 1.0, size=9)

        def phi(y, knots=knots, vals=vals):
            return np.interp(y, knots, vals)
        funcs.append((phi, knots))
    return funcs


def semigroup_selftest(n_functions: int = 8, seed: int = 0) -> dict:
    """Contraction / eigenfunction / composition battery for the semigroup."""
    rng = np.random.default_rng(seed)
    out = {"schema_version": reports.SCHEMA_VERSION, "kind": "semigroup_test"}

    worst = {"sup": 0.0, "L1": 0.0, "L2": 0.0, "L4": 0.0}
    grid = np.linspace(-12.0, 12.0, 1201)
    for phi, knots in _piecewise_linear_family(rng, n_functions):
        sup_phi = float(np.max(np.abs(phi(grid))))
        if sup_phi == 0.0:
            continue
        for sigma in (0.1, 1.0, 5.0):
            smoothed = similarity.ou_semigroup_profile(phi, 1.0, sigma, grid, knots)
            worst["sup"] = max(worst["sup"], float(np.max(np.abs(smoothed))) / sup_phi)
            for m in (1, 2, 4):
                ratio = similarity.smoothing_ratio(phi, 1.0, sigma, m, m,
                                                   breakpoints=knots)
                worst[f"L{m}"] = max(worst[f"L{m}"], ratio)
    out["contraction_worst"] = worst
    out["contraction_pass"] = bool(all(v <= 1.0 + 1e-8 for v in worst.values()))

    eig = []
    for delta in (0.5, 1.0):
        for sigma in (0.3, 1.0):
            th = 0.7
            lin = similarity.ou_semigroup_apply(lambda y: y, delta, sigma, th)
            quad = similarity.ou_semigroup_apply(lambda y: y**2, delta, sigma, th)
            eig.append(max(
                abs(similarity.ou_semigroup_apply(lambda y: np.ones_like(y), delta, sigma, th) - 1.0),
                abs(lin - th * math.exp(-sigma / 2.0)),
                abs(quad - (th**2 * math.exp(-sigma) + 2.0 * delta * (1.0 - math.exp(-sigma))))))
    out["eigen_worst_abs_error"] = max(eig)
    out["eigen_pass"] = bool(max(eig) <= 1e-10)

    cross = []
    phi0 = lambda y: np.interp(y, [-2.0, 0.0, 2.0], [0.0, 1.0, 0.0])
    for delta, lam in ((0.5, 1.0), (1.0, 4.0)):
        r = similarity.smoothing_ratio(phi0, delta, 1.0, 2, 2, lam=lam,
                                       breakpoints=(-2.0, 0.0, 2.0))
        cross.append({"delta": delta, "lam": lam, "ratio": r,
                      "bound": math.sqrt(lam / delta)})
    out["cross_weight"] = cross
    out["cross_weight_pass"] = bool(all(c["ratio"] <= c["bound"] + 1e-8 for c in cross))

    comp_err = 0.0
    phi1 = lambda y: np.interp(y, [-3.0, -1.0, 2.0], [0.2, 1.0, 0.1])
    for th in (-1.0, 0.0, 1.5):
        direct = similarity.ou_semigroup_apply(phi1, 1.0, 1.5, th,
                                               breakpoints=(-3.0, -1.0, 2.0))
        inner = lambda y: similarity.ou_semigroup_profile(phi1, 1.0, 1.0, y,
                                                          (-3.0, -1.0, 2.0))
        two_step = similarity.ou_semigroup_apply(inner, 1.0, 0.5, th)
        comp_err = max(comp_err, abs(direct - two_step))
    out["composition_worst_abs_error"] = comp_err
    out["composition_pass"] = bool(comp_err <= 1e-8)

    smoothing = []
    for w in (0.1, 0.05, 0.025):
        phi_w = lambda y, w=w: ((y >= -w) & (y <= w)).astype(float)
        smoothing.append({"halfwidth": w,
                          "ratio": similarity.smoothing_ratio(
                              phi_w, 1.0, 1.0, 1, 2, breakpoints=(-w, w), phi_sup=1.0)})
    out["delayed_smoothing_sigma1"] = smoothing
    out["delayed_smoothing_sup"] = max(s["ratio"] for s in smoothing)

    out["pass"] = bool(out["contraction_pass"] and out["eigen_pass"]
                       and out["cross_weight_pass"] and out["composition_pass"])
    return out


def cmd_semigroup_test(args) -> int:
    result = semigroup_selftest(n_functions=args.functions, seed=args.seed)
    if args.out:
        atomic_write_json(args.out, result)
    sys.stdout.write(reports.dump_json(result))
    return EXIT_OK if result["pass"] else EXIT_RUNTIME


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="blowlab",
        description="Blow-up laboratory for non-equidiffusive reaction-diffusion systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a cartesian parameter sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--parallel", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analyze", help="re-run analyses on an existing run directory")
    p_an.add_argument("--config", required=True)
    p_an.add_argument("--run-dir", required=True)
    p_an.add_argument("--out", required=True)
    p_an.set_defaults(func=cmd_analyze)

    p_sg = sub.add_parser("semigroup-test", help="weighted-semigroup self-test battery")
    p_sg.add_argument("--out", default=None)
    p_sg.add_argument("--functions", type=int, default=8)
    p_sg.add_argument("--seed", type=int, default=0)
    p_sg.set_defaults(func=cmd_semigroup_test)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
