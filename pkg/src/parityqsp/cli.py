"""Command line runner for phase tables, response curves, filter-quality
sweeps and cat-state experiments.

Every command writes plot-ready CSV and JSON into the output directory.
Data files embed the tool version, the fully resolved configuration and
the master seed so a result can be audited without the shell history.
Wall time is recorded in a per-invocation run_meta.json next to the
data files; keeping it out of the data files themselves is what makes
fixed-seed reruns bitwise identical.

Configuration comes from a single JSON document (--config) whose values
are overridden by explicit flags. Unknown keys are rejected.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical
failure, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields as dc_fields
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cavity_qed import DeviceParams, schedule_cat
from .dynamics import run_cat_experiment
from .errors import (DegenerateOutcomeError, IntegratorFailure,
                     InvalidArgumentError, InvalidComparisonError,
                     SingularParametersError, StepSizeViolation,
                     TruncationError, UnsupportedInputError,
                     UnsupportedModulusError)
from .fock_space import (FockSpaceConfig, coherent_state, default_dim,
                         joint_state)
from .parity_measurement import delta_report
from .perturbation import (PERTURBATION_CHANNELS, compare_with_full,
                           perturbative_estimates)
from .phase_synthesis import analytic_phases, optimize_phases
from .qubit_algebra import real_protocol

_USAGE_ERRORS = (InvalidArgumentError, InvalidComparisonError,
                 UnsupportedInputError, UnsupportedModulusError)
_NUMERICAL_ERRORS = (TruncationError, IntegratorFailure, StepSizeViolation,
                     SingularParametersError, DegenerateOutcomeError)

_COMMON_KEYS = ("seed", "jobs", "engine", "out", "dim", "no_kerr")
_COMMAND_KEYS = {
    "phases": ("r", "optimize"),
    "response": ("r", "k", "m_min", "m_max", "points"),
    "delta": ("r_min", "r_max", "k"),
    "prepare": ("r", "k", "nbar", "repeats", "trajectories", "dt_max",
                "processing", "channels", "device", "dump_schedule"),
    "sweep": ("axis", "values", "r", "k", "nbar", "repeats", "trajectories",
              "dt_max", "processing", "channels", "device", "with_pert"),
    "pert-compare": ("nbar_values", "r", "k", "repeats", "dt_max",
                     "processing", "channels", "device", "substeps"),
}


# ----------------------------------------------------------------------
# configuration plumbing

def _load_config_file(path, allowed):
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"config file is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise InvalidArgumentError("config file must hold a JSON object")
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise InvalidArgumentError(
            "unknown config keys for this command: " + ", ".join(unknown))
    return raw


def _resolve_config(args, command):
    """File values, overridden by explicit flags, then defaults."""
    allowed = _COMMON_KEYS + _COMMAND_KEYS[command]
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config, allowed))
    for key in allowed:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg.setdefault("out", "out")
    cfg.setdefault("jobs", 1)
    return cfg


def _as_int(cfg, key, minimum=None, default=None):
    value = cfg.get(key, default)
    if value is None:
        raise InvalidArgumentError(f"missing required setting {key!r}")
    if isinstance(value, bool):
        raise InvalidArgumentError(f"{key} must be an integer, got {value!r}")
    try:
        ivalue = int(value)
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{key} must be an integer, got {value!r}")
    if ivalue != value:
        raise InvalidArgumentError(f"{key} must be an integer, got {value!r}")
    if minimum is not None and ivalue < minimum:
        raise InvalidArgumentError(f"{key} must be >= {minimum}, got {ivalue}")
    return ivalue


def _as_float(cfg, key, default=None, required=False):
    value = cfg.get(key, default)
    if value is None:
        if required:
            raise InvalidArgumentError(f"missing required setting {key!r}")
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{key} must be a number, got {value!r}")


def _number_list(value, key, cast):
    if value is None:
        raise InvalidArgumentError(f"missing required setting {key!r}")
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    if not isinstance(value, (list, tuple)) or not value:
        raise InvalidArgumentError(f"{key} must be a non-empty list")
    try:
        return [cast(v) for v in value]
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{key} entries must be numbers")


def _channel_list(cfg):
    value = cfg.get("channels")
    if value is None:
        return None
    if isinstance(value, str):
        value = [part.strip() for part in value.split(",") if part.strip()]
    bad = sorted(set(value) - set(PERTURBATION_CHANNELS))
    if bad:
        raise InvalidArgumentError(
            "unknown channels: " + ", ".join(bad)
            + "; choose from " + ", ".join(PERTURBATION_CHANNELS))
    return list(value)


def _device_params(cfg):
    entry = cfg.get("device", "default")
    if isinstance(entry, str):
        if entry != "default":
            raise InvalidArgumentError(f"unknown device preset {entry!r}")
        dev = DeviceParams()
    elif isinstance(entry, dict):
        allowed = {f.name for f in dc_fields(DeviceParams)}
        unknown = sorted(set(entry) - allowed)
        if unknown:
            raise InvalidArgumentError(
                "unknown device parameters: " + ", ".join(unknown))
        try:
            dev = DeviceParams(**{k: float(v) for k, v in entry.items()})
        except (TypeError, ValueError):
            raise InvalidArgumentError("device parameters must be numbers")
    else:
        raise InvalidArgumentError(
            "device must be a preset name or a parameter object")
    if cfg.get("no_kerr"):
        dev = replace(dev, eta=0.0)
    return dev


# ----------------------------------------------------------------------
# output plumbing

def _echo_config(cfg):
    """The resolved configuration as plain JSON-ready values."""
    echo = {}
    for key, value in sorted(cfg.items()):
        if isinstance(value, (np.integer, np.floating)):
            value = value.item()
        echo[key] = value
    if isinstance(echo.get("device"), dict):
        echo["device"] = {k: float(v) for k, v in sorted(echo["device"].items())}
    return echo


def _meta(cfg):
    return {"tool_version": __version__,
            "master_seed": cfg.get("seed"),
            "config": _echo_config(cfg)}


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True)
    path.write_text(text + "\n")


def _write_csv(path, header, rows, meta):
    with open(path, "w", newline="") as fh:
        fh.write(f"# tool_version={meta['tool_version']}\n")
        fh.write(f"# master_seed={meta['master_seed']}\n")
        fh.write("# config=" + json.dumps(meta["config"], sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(value):
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return value


def _out_dir(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run_meta(out, command, cfg, written, t0):
    payload = {"command": command,
               "tool_version": __version__,
               "master_seed": cfg.get("seed"),
               "config": _echo_config(cfg),
               "outputs": sorted(p.name for p in written),
               "wall_time_s": time.perf_counter() - t0}
    _write_json(out / "run_meta.json", payload)


# ----------------------------------------------------------------------
# commands

def cmd_phases(args):
    t0 = time.perf_counter()
    cfg = _resolve_config(args, "phases")
    r = _as_int(cfg, "r")
    seq = analytic_phases(r)
    angles = [float(a) for a in seq.angles]
    out = _out_dir(cfg)
    meta = _meta(cfg)
    written = []

    path_csv = out / f"phases_r{r}.csv"
    _write_csv(path_csv, ["index", "angle_rad"],
               list(enumerate(angles)), meta)
    written.append(path_csv)

    path_json = out / f"phases_r{r}.json"
    _write_json(path_json, {**meta, "r": r, "angles_rad": angles,
                            "sum_rad": float(sum(angles))})
    written.append(path_json)

    if cfg.get("optimize") is not None:
        opt = cfg["optimize"]
        if isinstance(opt, (list, tuple)) and len(opt) == 2:
            degree, tol = int(opt[0]), float(opt[1])
        elif isinstance(opt, dict):
            degree = _as_int(opt, "d", minimum=1)
            tol = _as_float(opt, "tol", default=1e-10)
        else:
            raise InvalidArgumentError("optimize takes a degree and a tolerance")
        report = optimize_phases(r, degree, tol=tol)
        path_opt = out / f"synthesis_r{r}_d{degree}.json"
        _write_json(path_opt, {
            **meta, "r": r, "degree": degree, "tolerance": tol,
            "angles_rad": [float(a) for a in report.phases.angles],
            "cost": float(report.cost),
            "iterations": int(report.iterations),
            "converged": bool(report.converged),
            "grid_size": int(report.grid_size)})
        written.append(path_opt)

    _write_run_meta(out, "phases", cfg, written, t0)
    print(f"wrote {', '.join(p.name for p in written)} to {out}")


def cmd_response(args):
    t0 = time.perf_counter()
    cfg = _resolve_config(args, "response")
    r = _as_int(cfg, "r")
    k = _as_int(cfg, "k", default=0)
    m_min = _as_float(cfg, "m_min", default=0.0)
    m_max = _as_float(cfg, "m_max", default=float(r))
    if m_max <= m_min:
        raise InvalidArgumentError("m_max must exceed m_min")
    points = cfg.get("points")
    if points is None:
        points = int(round(40 * (m_max - m_min))) + 1
    points = _as_int({"points": points}, "points", minimum=2)

    seq = analytic_phases(r)
    rows = []
    for m in np.linspace(m_min, m_max, points):
        theta = math.pi * (m - k) / r
        u = real_protocol(seq, theta)
        u00, u10 = complex(u[0, 0]), complex(u[1, 0])
        rows.append([float(m), theta, u00.real, u00.imag,
                     abs(u00) ** 2, abs(u10) ** 2])

    out = _out_dir(cfg)
    meta = _meta(cfg)
    path = out / f"response_r{r}_k{k}.csv"
    _write_csv(path, ["m", "theta_rad", "u00_re", "u00_im",
                      "weight_00", "weight_10"], rows, meta)
    _write_run_meta(out, "response", cfg, [path], t0)
    print(f"wrote {path}")


def cmd_delta(args):
    t0 = time.perf_counter()
    cfg = _resolve_config(args, "delta")
    r_min = _as_int(cfg, "r_min", minimum=2)
    r_max = _as_int(cfg, "r_max")
    if r_max < r_min:
        raise InvalidArgumentError("r_max must be >= r_min")
    k = _as_int(cfg, "k", default=0)
    rows = []
    for r in range(r_min, r_max + 1):
        dim = cfg.get("dim") or max(2 * r, 16)
        rep = delta_report(r, k % r, FockSpaceConfig(int(dim)))
        rows.append([r, k % r, rep["delta"], rep["delta_joint"],
                     rep["depth"], rep["dim"]])

    out = _out_dir(cfg)
    meta = _meta(cfg)
    path = out / f"delta_r{r_min}-{r_max}_k{k}.csv"
    _write_csv(path, ["r", "k", "delta", "delta_joint", "depth", "dim"],
               rows, meta)
    _write_run_meta(out, "delta", cfg, [path], t0)
    print(f"wrote {path}")


def _experiment_kwargs(cfg):
    r = _as_int(cfg, "r", minimum=2)
    nbar = _as_float(cfg, "nbar", required=True)
    engine = cfg.get("engine", "unitary")
    kwargs = dict(
        r=r,
        nbar=nbar,
        repeats=_as_int(cfg, "repeats", minimum=1, default=1),
        k=_as_int(cfg, "k", default=0),
        engine=engine,
        params=_device_params(cfg),
        dim=cfg.get("dim") and int(cfg["dim"]),
        seed=cfg.get("seed"),
        n_traj=_as_int(cfg, "trajectories", minimum=1, default=4000),
        dt_max=_as_float(cfg, "dt_max"),
        processing_mode=cfg.get("processing", "rabi"),
        channels=_channel_list(cfg),
    )
    if kwargs["processing_mode"] not in ("rabi", "ideal"):
        raise InvalidArgumentError("processing must be 'rabi' or 'ideal'")
    return kwargs


def _result_payload(res):
    return {
        "engine": res.engine, "r": res.r, "k": res.k,
        "repeats": res.repeats, "nbar": res.nbar, "dim": res.dim,
        "seed": res.seed,
        "p_success": res.p_success, "p_success_se": res.p_success_se,
        "fidelity": res.fidelity, "fidelity_se": res.fidelity_se,
        "leaked_weight": res.leaked_weight,
        "ideal_weight": res.ideal_weight,
        "total_time": res.total_time,
        "n_trajectories": res.n_trajectories,
        "success_pattern": "".join(
            "1" if i % 2 == 0 else "0" for i in range(res.repeats)),
        "outcomes": {key: _cell(v) for key, v in sorted(res.outcomes.items())},
    }


def cmd_prepare(args):
    t0 = time.perf_counter()
    cfg = _resolve_config(args, "prepare")
    kwargs = _experiment_kwargs(cfg)
    cfg["device"] = asdict(kwargs["params"])
    res = run_cat_experiment(**kwargs)

    out = _out_dir(cfg)
    meta = _meta(cfg)
    written = []

    path_json = out / "prepare_result.json"
    payload = {**meta, **_result_payload(res),
               "photon_dist": [float(p) for p in res.photon_dist]}
    _write_json(path_json, payload)
    written.append(path_json)

    path_csv = out / "photon_dist.csv"
    _write_csv(path_csv, ["n", "probability"],
               list(enumerate(float(p) for p in res.photon_dist)), meta)
    written.append(path_csv)

    if cfg.get("dump_schedule"):
        sched = schedule_cat(kwargs["r"], kwargs["k"], kwargs["repeats"],
                             kwargs["params"], kwargs["nbar"],
                             processing_mode=kwargs["processing_mode"])
        rows = []
        for i, seg in enumerate(sched.segments):
            rows.append([i, seg.kind, seg.label, seg.duration, seg.x_amp,
                         seg.chi_n, seg.kerr_half_z, seg.kerr_half_i,
                         seg.z_cancel, seg.virtual_z, seg.instant_x,
                         "" if seg.expected is None else seg.expected])
        path_sched = out / "schedule.csv"
        _write_csv(path_sched,
                   ["index", "kind", "label", "duration", "x_amp", "chi_n",
                    "kerr_half_z", "kerr_half_i", "z_cancel", "virtual_z",
                    "instant_x", "expected"], rows, meta)
        written.append(path_sched)

    _write_run_meta(out, "prepare", cfg, written, t0)
    print(f"p_success={res.p_success:.6f} fidelity={res.fidelity:.6f} "
          f"(files in {out})")


_SWEEP_COLUMNS = ["axis", "value", "r", "k", "repeats", "nbar", "engine",
                  "dim", "seed", "p_success", "p_success_se", "fidelity",
                  "fidelity_se", "leaked_weight", "total_time",
                  "f_pert", "f_naive"]


def _sweep_point(payload):
    """One sweep point; runs in a worker process."""
    kwargs = dict(payload["kwargs"])
    res = run_cat_experiment(**kwargs)
    row = {
        "axis": payload["axis"], "value": payload["value"],
        "r": res.r, "k": res.k, "repeats": res.repeats, "nbar": res.nbar,
        "engine": res.engine, "dim": res.dim, "seed": res.seed,
        "p_success": res.p_success, "p_success_se": res.p_success_se,
        "fidelity": res.fidelity, "fidelity_se": res.fidelity_se,
        "leaked_weight": res.leaked_weight, "total_time": res.total_time,
        "f_pert": "", "f_naive": "",
    }
    if payload["with_pert"]:
        dev = kwargs["params"]
        if kwargs.get("channels"):
            dev = dev.only_channels(kwargs["channels"])
        sched = schedule_cat(res.r, res.k, res.repeats, dev, res.nbar,
                             processing_mode=kwargs["processing_mode"])
        psi0 = joint_state(0, coherent_state(res.nbar, res.dim))
        rep = perturbative_estimates(sched, psi0,
                                     channels=kwargs.get("channels"))
        row["f_pert"] = rep.fidelity_pert
        row["f_naive"] = rep.fidelity_naive
    return row


def cmd_sweep(args):
    t0 = time.perf_counter()
    cfg = _resolve_config(args, "sweep")
    axis = cfg.get("axis")
    if axis not in ("r", "nbar"):
        raise InvalidArgumentError("axis must be 'r' or 'nbar'")
    cast = int if axis == "r" else float
    values = _number_list(cfg.get("values"), "values", cast)
    engine = cfg.get("engine", "unitary")
    if engine == "trajectory" and cfg.get("seed") is None:
        raise InvalidArgumentError("trajectory sweeps need --seed")

    base = dict(cfg)
    base["device"] = asdict(_device_params(cfg))
    cfg["device"] = base["device"]
    seeds = [None] * len(values)
    if cfg.get("seed") is not None:
        children = np.random.SeedSequence(int(cfg["seed"])).spawn(len(values))
        seeds = [int(c.generate_state(1, np.uint32)[0]) for c in children]

    payloads = []
    for value, point_seed in zip(values, seeds):
        point = dict(base)
        point[axis] = value
        kwargs = _experiment_kwargs(point)
        kwargs["seed"] = point_seed
        payloads.append({"axis": axis, "value": value, "kwargs": kwargs,
                         "with_pert": bool(cfg.get("with_pert"))})

    jobs = _as_int(cfg, "jobs", minimum=1, default=1)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, payloads))
    else:
        results = [_sweep_point(p) for p in payloads]

    rows = [[row[c] for c in _SWEEP_COLUMNS] for row in results]
    out = _out_dir(cfg)
    meta = _meta(cfg)
    path = out / f"sweep_{axis}.csv"
    _write_csv(path, _SWEEP_COLUMNS, rows, meta)
    _write_run_meta(out, "sweep", cfg, [path], t0)
    print(f"wrote {len(rows)} rows to {path}")


def cmd_pert_compare(args):
    t0 = time.perf_counter()
    cfg = _resolve_config(args, "pert-compare")
    nbars = _number_list(cfg.get("nbar_values"), "nbar_values", float)
    engine = cfg.get("engine", "lindblad")
    if engine == "unitary":
        raise InvalidArgumentError(
            "pert-compare needs a dissipative engine (lindblad or trajectory)")
    if engine == "trajectory" and cfg.get("seed") is None:
        raise InvalidArgumentError("trajectory comparisons need --seed")
    channels = _channel_list(cfg) or list(PERTURBATION_CHANNELS)
    repeats = _as_int(cfg, "repeats", minimum=1, default=1)
    k = _as_int(cfg, "k", default=0)
    processing = cfg.get("processing", "rabi")
    substeps = _as_int(cfg, "substeps", minimum=1, default=16)
    dev = _device_params(cfg)
    cfg["device"] = asdict(dev)

    rows = []
    for nbar in nbars:
        r = cfg.get("r") or math.ceil(math.sqrt(nbar))
        r = int(r)
        dim = int(cfg.get("dim") or default_dim(nbar))
        runs = {}
        for label in channels:
            runs[label] = run_cat_experiment(
                r, nbar, repeats=repeats, k=k, engine=engine, params=dev,
                dim=dim, seed=cfg.get("seed"),
                n_traj=_as_int(cfg, "trajectories", minimum=1, default=4000),
                dt_max=_as_float(cfg, "dt_max"),
                processing_mode=processing, channels=[label])
        if len(channels) > 1:
            runs["combined"] = run_cat_experiment(
                r, nbar, repeats=repeats, k=k, engine=engine, params=dev,
                dim=dim, seed=cfg.get("seed"),
                n_traj=_as_int(cfg, "trajectories", minimum=1, default=4000),
                dt_max=_as_float(cfg, "dt_max"),
                processing_mode=processing, channels=channels)

        sched = schedule_cat(r, k, repeats, dev.only_channels(channels),
                             nbar, processing_mode=processing)
        psi0 = joint_state(0, coherent_state(nbar, dim))
        table = compare_with_full(sched, psi0, channels, runs)
        budget = perturbative_estimates(sched, psi0, channels=channels,
                                        substeps=substeps)
        for entry in table:
            label = entry["channel"]
            rows.append([
                nbar, r, dim, engine, label,
                entry["F_full"], entry["F_pert"], entry["F_naive"],
                entry["gap_pert"], entry["gap_naive"],
                budget.eta_factors.get(label, ""),
                budget.per_channel_infidelity.get(label, ""),
            ])

    out = _out_dir(cfg)
    meta = _meta(cfg)
    path = out / "pert_compare.csv"
    _write_csv(path, ["nbar", "r", "dim", "engine", "channel", "F_full",
                      "F_pert", "F_naive", "gap_pert", "gap_naive", "eta",
                      "infidelity_pert"], rows, meta)
    _write_run_meta(out, "pert-compare", cfg, [path], t0)
    print(f"wrote {len(rows)} rows to {path}")


# ----------------------------------------------------------------------
# argument parsing

def _add_common(parser):
    parser.add_argument("--config", metavar="PATH",
                        help="JSON configuration file; flags override it")
    parser.add_argument("--seed", type=int, metavar="N",
                        help="master seed for stochastic engines")
    parser.add_argument("--jobs", type=int, metavar="N",
                        help="worker processes for sweeps (default 1)")
    parser.add_argument("--engine",
                        choices=("unitary", "lindblad", "trajectory"),
                        help="simulation engine (default unitary)")
    parser.add_argument("--out", metavar="DIR",
                        help="output directory (default ./out)")
    parser.add_argument("--dim", type=int, metavar="N",
                        help="Fock cutoff override")
    parser.add_argument("--no-kerr", dest="no_kerr", action="store_const",
                        const=True,
                        help="zero the qubit-state-dependent Kerr")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="parityqsp",
        description="Generalized parity measurements on a cavity mode: "
                    "phase synthesis, device simulation and error budgets.")
    parser.add_argument("--version", action="version",
                        version=f"parityqsp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="COMMAND")

    p = sub.add_parser("phases", help="write the processing phase table")
    p.add_argument("r", type=int, help="number of photon classes")
    p.add_argument("--optimize", nargs=2, metavar=("DEGREE", "TOL"),
                   help="also run the numerical refinement at this degree")
    _add_common(p)
    p.set_defaults(func=cmd_phases)

    p = sub.add_parser("response", help="write the filter response curve")
    p.add_argument("r", type=int)
    p.add_argument("k", type=int, nargs="?", default=None,
                   help="target class (default 0)")
    p.add_argument("--m-min", dest="m_min", type=float)
    p.add_argument("--m-max", dest="m_max", type=float)
    p.add_argument("--points", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_response)

    p = sub.add_parser("delta", help="write the filter error table")
    p.add_argument("r_min", type=int)
    p.add_argument("r_max", type=int)
    p.add_argument("--k", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("prepare", help="run one cat-state experiment")
    p.add_argument("--r", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--nbar", type=float)
    p.add_argument("--repeats", type=int)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--dt-max", dest="dt_max", type=float)
    p.add_argument("--processing", choices=("rabi", "ideal"))
    p.add_argument("--channels",
                   help="comma-separated jump channels to keep")
    p.add_argument("--dump-schedule", dest="dump_schedule",
                   action="store_const", const=True,
                   help="also write the per-segment schedule table")
    _add_common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("sweep", help="run an axis sweep to long-format CSV")
    p.add_argument("--axis", choices=("r", "nbar"))
    p.add_argument("--values", help="comma-separated axis values")
    p.add_argument("--r", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--nbar", type=float)
    p.add_argument("--repeats", type=int)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--dt-max", dest="dt_max", type=float)
    p.add_argument("--processing", choices=("rabi", "ideal"))
    p.add_argument("--channels")
    p.add_argument("--with-pert", dest="with_pert", action="store_const",
                   const=True, help="add first-order estimate columns")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pert-compare",
                       help="compare engine fidelities with the error budget")
    p.add_argument("--nbar-values", dest="nbar_values",
                   help="comma-separated mean photon numbers")
    p.add_argument("--r", type=int,
                   help="classes (default ceil(sqrt(nbar)) per point)")
    p.add_argument("--k", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--dt-max", dest="dt_max", type=float)
    p.add_argument("--processing", choices=("rabi", "ideal"))
    p.add_argument("--channels")
    p.add_argument("--substeps", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_pert_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:
        print(f"internal error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
