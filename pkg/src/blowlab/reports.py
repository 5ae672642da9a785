"""Deterministic JSON/CSV export and import of runs, profiles and reports.

All floats serialize through ``repr`` (shortest round-trip form), files are
written atomically (temp + rename), and analysis reports reference the
trajectory files they consumed by content hash.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from typing import Optional

import numpy as np

from .core import (BoundaryCondition, ModelParams, RadialGrid, StopReason,
                   Variant, make_grid)
from .msystem import MSystemSpec, NonlinearityDescriptor, NonlinearityKind
from .solver import Snapshot, SolverConfig, Trajectory

SCHEMA_VERSION = 1


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def atomic_write_json(path: str, obj) -> None:
    atomic_write_text(path, dump_json(obj))


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def model_to_dict(model, n: Optional[int] = None, R: Optional[float] = None) -> dict:
    if isinstance(model, ModelParams):
        return {"kind": "two_component", "delta1": model.delta1, "delta2": model.delta2,
                "p": model.p, "q": model.q, "variant": model.variant.value,
                "n": model.n, "R": model.R, "bc": model.bc.value}
    if isinstance(model, MSystemSpec):
        return {"kind": "m_component",
                "deltas": list(model.deltas),
                "nonlinearities": [
                    {"kind": f.kind.value, "p": f.p, "minus_one": f.minus_one}
                    for f in model.nonlinearities],
                "bc": model.bc.value, "n": n, "R": R}
    raise TypeError(f"unknown model type {type(model)!r}")


def model_from_dict(d: dict):
    """Returns (model, n, R)."""
    if d["kind"] == "two_component":
        params = ModelParams(delta1=d["delta1"], delta2=d["delta2"], p=d["p"], q=d["q"],
                             variant=Variant(d.get("variant", "exp")),
                             n=int(d.get("n", 1)), R=float(d["R"]),
                             bc=BoundaryCondition(d.get("bc", "neumann")))
        return params, params.n, params.R
    if d["kind"] == "m_component":
        spec = MSystemSpec(
            deltas=tuple(float(x) for x in d["deltas"]),
            nonlinearities=tuple(
                NonlinearityDescriptor(NonlinearityKind(f["kind"]), float(f["p"]),
                                       bool(f.get("minus_one", False)))
                for f in d["nonlinearities"]),
            bc=BoundaryCondition(d.get("bc", "neumann")))
        return spec, int(d.get("n", 1)), float(d["R"])
    raise ValueError(f"unknown model kind {d.get('kind')!r}")


def solver_config_to_dict(cfg: SolverConfig) -> dict:
    return {"cfl_safety": cfg.cfl_safety, "reaction_safety": cfg.reaction_safety,
            "amplitude_cap": cfg.amplitude_cap, "power_cap": cfg.power_cap,
            "t_horizon": cfg.t_horizon, "sample_stride": cfg.sample_stride,
            "checkpoint_times": list(cfg.checkpoint_times),
            "checkpoint_amp_stride": cfg.checkpoint_amp_stride,
            "probe_fractions": list(cfg.probe_fractions)}


def solver_config_from_dict(d: dict) -> SolverConfig:
    kwargs = dict(d)
    if "checkpoint_times" in kwargs:
        kwargs["checkpoint_times"] = tuple(kwargs["checkpoint_times"])
    if "probe_fractions" in kwargs:
        kwargs["probe_fractions"] = tuple(kwargs["probe_fractions"])
    return SolverConfig(**kwargs)


def snapshot_to_dict(snap: Snapshot, grid: RadialGrid, model=None,
                     n: Optional[int] = None, R: Optional[float] = None) -> dict:
    d = {"schema_version": SCHEMA_VERSION, "kind": "profile",
         "t": snap.t, "grid": {"R": grid.R, "J": grid.J},
         "fields": [row.tolist() for row in snap.fields]}
    if snap.fields.shape[0] == 2:
        d["u"] = snap.fields[0].tolist()
        d["v"] = snap.fields[1].tolist()
    if model is not None:
        d["model"] = model_to_dict(model, n=n, R=R)
    return d


def snapshot_from_dict(d: dict):
    """Returns (snapshot, grid, model_or_None)."""
    grid = make_grid(float(d["grid"]["R"]), int(d["grid"]["J"]))
    if "fields" in d:
        fields = np.asarray(d["fields"], dtype=float)
    else:
        fields = np.stack([np.asarray(d["u"], dtype=float),
                           np.asarray(d["v"], dtype=float)])
    model = None
    if "model" in d:
        model, _, _ = model_from_dict(d["model"])
    return Snapshot(t=float(d["t"]), fields=fields), grid, model


def save_snapshot(path: str, snap: Snapshot, grid: RadialGrid, model=None,
                  n: Optional[int] = None, R: Optional[float] = None) -> None:
    atomic_write_json(path, snapshot_to_dict(snap, grid, model, n=n, R=R))


def load_snapshot(path: str):
    with open(path) as fh:
        return snapshot_from_dict(json.load(fh))


def _component_labels(m: int):
    return ["u", "v"] if m == 2 else [f"c{i}" for i in range(m)]


def trajectory_csv(traj: Trajectory) -> str:
    """Time-series table: t, componentwise maxima, then one column per probe
    radius per component."""
    labels = _component_labels(traj.m)
    cols = ["t"] + [f"{lab}_max" for lab in labels]
    for lab in labels:
        cols += [f"{lab}@{repr(float(r))}" for r in traj.probe_radii]
    lines = [",".join(cols)]
    nprobe = traj.probe_radii.size
    for k in range(traj.t.size):
        row = [repr(float(traj.t[k]))]
        row += [repr(float(x)) for x in traj.amps[k]]
        for i in range(traj.m):
            row += [repr(float(traj.probes[k, i, j])) for j in range(nprobe)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def trajectory_meta(traj: Trajectory, n: int, R: float) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "run_meta",
            "model": model_to_dict(traj.model, n=n, R=R),
            "grid": {"R": traj.grid.R, "J": traj.grid.J},
            "solver": solver_config_to_dict(traj.config),
            "probe_radii": [float(r) for r in traj.probe_radii],
            "stop": traj.stop.value, "t_stop": traj.t_stop,
            "total_steps": traj.total_steps,
            "n_samples": int(traj.t.size),
            "n_checkpoints": sum(len(b) for b in traj.checkpoints)}


def save_trajectory(outdir: str, traj: Trajectory, n: int, R: float,
                    series_format: str = "csv") -> dict:
    """Write samples (CSV or JSON), checkpoints and run metadata.

    Returns a manifest with the content hashes analysis reports embed.
    """
    os.makedirs(outdir, exist_ok=True)
    if series_format == "csv":
        series_path = os.path.join(outdir, "samples.csv")
        atomic_write_text(series_path, trajectory_csv(traj))
    elif series_format == "json":
        series_path = os.path.join(outdir, "samples.json")
        atomic_write_json(series_path, {
            "schema_version": SCHEMA_VERSION, "kind": "samples",
            "t": traj.t.tolist(), "amps": traj.amps.tolist(),
            "probes": traj.probes.tolist(),
            "probe_radii": traj.probe_radii.tolist()})
    else:
        raise ValueError(f"unknown series format {series_format!r}")

    ckdir = os.path.join(outdir, "checkpoints")
    os.makedirs(ckdir, exist_ok=True)
    index = []
    for bi, burst in enumerate(traj.checkpoints):
        for si, snap in enumerate(burst):
            name = f"ckpt_{bi:04d}_{si}.json"
            save_snapshot(os.path.join(ckdir, name), snap, traj.grid,
                          model=traj.model, n=n, R=R)
            index.append({"file": name, "burst": bi, "t": snap.t})
    meta = trajectory_meta(traj, n, R)
    meta["checkpoint_index"] = index
    atomic_write_json(os.path.join(outdir, "meta.json"), meta)
    return {"series": series_path, "series_sha256": file_sha256(series_path),
            "meta": os.path.join(outdir, "meta.json")}


def load_trajectory(outdir: str) -> tuple:
    """Rebuild a Trajectory (plus n, R) from a run directory.

    Works from the dump files alone so every monitor can be re-run offline.
    """
    with open(os.path.join(outdir, "meta.json")) as fh:
        meta = json.load(fh)
    model, n, R = model_from_dict(meta["model"])
    grid = make_grid(float(meta["grid"]["R"]), int(meta["grid"]["J"]))
    cfg = solver_config_from_dict(meta["solver"])

    series_csv = os.path.join(outdir, "samples.csv")
    if os.path.exists(series_csv):
        data = np.genfromtxt(series_csv, delimiter=",", skip_header=1)
        data = np.atleast_2d(data)
        probe_radii = np.asarray(meta["probe_radii"], dtype=float)
        m = len(meta["model"].get("deltas", (0, 0))) if meta["model"]["kind"] == "m_component" else 2
        t = data[:, 0]
        amps = data[:, 1:1 + m]
        probes = data[:, 1 + m:].reshape(t.size, m, probe_radii.size)
    else:
        with open(os.path.join(outdir, "samples.json")) as fh:
            sd = json.load(fh)
        t = np.asarray(sd["t"], dtype=float)
        amps = np.asarray(sd["amps"], dtype=float)
        probes = np.asarray(sd["probes"], dtype=float)
        probe_radii = np.asarray(sd["probe_radii"], dtype=float)

    bursts: dict = {}
    for entry in meta["checkpoint_index"]:
        snap, _, _ = load_snapshot(os.path.join(outdir, "checkpoints", entry["file"]))
        bursts.setdefault(entry["burst"], []).append(snap)
    checkpoints = [sorted(bursts[k], key=lambda s: s.t) for k in sorted(bursts)]

    probe_idx = np.array([grid.nearest_index(r) for r in probe_radii], dtype=np.int64)
    traj = Trajectory(model=model, grid=grid, config=cfg, probe_radii=probe_radii,
                      probe_indices=probe_idx, t=t, amps=amps, probes=probes,
                      checkpoints=checkpoints, stop=StopReason(meta["stop"]),
                      t_stop=float(meta["t_stop"]), total_steps=int(meta["total_steps"]))
    return traj, n, R


def save_fixture(path: str, u0: np.ndarray, v0: np.ndarray, grid: RadialGrid,
                 params: ModelParams, case: str, eps: float = 0.1,
                 claims_pass: bool = True) -> None:
    snap = Snapshot(t=0.0, fields=np.stack([np.asarray(u0, float), np.asarray(v0, float)]))
    d = snapshot_to_dict(snap, grid, params)
    d["kind"] = "fixture"
    d["fixture"] = {"case": case, "eps": eps, "claims_pass": claims_pass}
    atomic_write_json(path, d)


def load_fixture(path: str):
    """Load an initial-data fixture; fixtures claiming pass=true are
    re-verified at load time and a stale claim raises."""
    from .initial_data import DataCase, verify_initial_data

    with open(path) as fh:
        d = json.load(fh)
    snap, grid, model = snapshot_from_dict(d)
    fx = d.get("fixture", {})
    if fx.get("claims_pass"):
        report = verify_initial_data(snap.fields[0], snap.fields[1], model, grid,
                                     DataCase(fx["case"]), eps=float(fx.get("eps", 0.1)))
        if not report.passed:
            raise ValueError(f"fixture {path} claims pass=true but fails verification")
    return snap.fields[0], snap.fields[1], grid, model, fx
