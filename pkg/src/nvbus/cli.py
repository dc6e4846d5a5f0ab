"""Batch front end: ``nvbus run`` and ``nvbus sweep`` over named experiments.

Config documents are JSON with a fixed schema (version 1)::

    {"version": 1, "experiment": "ffst-budget", "seed": 0,
     "parameters": {"N": 7, "T1": 0.1},
     "sweep": {"axes": [{"name": "T1", "values": [0.05, 0.1, 0.25]}]}}

Parameter keys are checked against each experiment's defaults; unknown keys
fail with exit code 2.  ``parameters.constants`` overrides physical constants.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import itertools
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import __version__, budget, planner, protocols, spin
from .core import PhysicalConstants, SystemSpec
from .dynamics import IntegrationError
from .hamiltonians import ChainSpec, DimensionError

SCHEMA_VERSION = 1
MAX_AXES = 3
MAX_CELLS = 4096
TOP_KEYS = {"version", "experiment", "parameters", "seed", "output_dir", "sweep"}

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_BOUNDARY = 0, 2, 3, 4


class ConfigError(Exception):
    """Schema violation in a config document."""


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    parameters: dict
    seed: int = 0
    output_dir: str | None = None
    sweep: tuple = ()
    version: int = SCHEMA_VERSION

    def resolved(self) -> dict:
        return {
            "version": self.version,
            "experiment": self.experiment,
            "parameters": self.parameters,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "sweep": {"axes": [{"name": n, "values": list(v)} for n, v in self.sweep]},
        }


@dataclasses.dataclass
class Result:
    rows: list
    summary: dict
    boundary: bool = False


# ---------------------------------------------------------------- experiments

def _constants(p) -> PhysicalConstants:
    return PhysicalConstants(**p.get("constants", {}))


def _register_gates(p, seed):
    spec = SystemSpec(constants=_constants(p))
    reports = [protocols.gate_ce_not_n(spec, p["rabi"]), protocols.gate_cn_not_e(spec),
               protocols.gate_register_swap(spec)]
    rows = [{"gate": r.protocol, "fidelity": r.fidelity, "duration": r.duration} for r in reports]
    return Result(rows, {"gates": [r.to_record() for r in reports], "cp_wait_time": protocols.cp_wait_time(spec)})


def _adiabatic_swap(p, seed):
    rows = []
    for kt in p["kappa_t"]:
        ramp = protocols.optimal_ramp(p["kappa"], kt / p["kappa"], p["omega_max"], p["shape"])
        r = protocols.adiabatic_pair_swap(p["kappa"] * p["coupling_scale"], ramp)
        win = protocols.windowed_pair_infidelity(p["kappa"], kt / p["kappa"], p["omega_max"], p["shape"])
        rows.append({"kappa_t": kt, "t_ss": ramp.duration, "infidelity": 1 - r.fidelity,
                     "site_infidelity": 1 - r.extras["site_fidelity"], "windowed_infidelity": win})
    summary = {"points": rows}
    if len(rows) >= 2:
        x = np.log([r["kappa_t"] for r in rows])
        y = np.log([max(r["windowed_infidelity"], 1e-300) for r in rows])
        summary["loglog_slope"] = float(np.polyfit(x, y, 1)[0])
    return Result(rows, summary)


def _sequential_swap(p, seed):
    chain = ChainSpec.uniform(p["n_chain"], p["kappa"])
    r = protocols.sequential_swap(chain, p["kappa_t"] / p["kappa"], p["omega_max"], p["shape"], p["mode"])
    rec = r.to_record()
    return Result([{"n_chain": p["n_chain"], "fidelity": r.fidelity, "duration": r.duration}], rec)


def _ffst(p, seed):
    k = p["k"] or protocols.fastest_modes(p["n_chain"])[-1]
    tun = protocols.ffst_tune(p["n_chain"], p["kappa"], k, p["g_over_kappa"] * p["kappa"], p["omega_n"])
    r = protocols.ffst_transfer(tun, detune=p["detune"], unpolarized=p["unpolarized"])
    row = {"n_chain": p["n_chain"], "k": k, "g": tun.g, "duration": r.duration, "fidelity": r.fidelity,
           "transfer_probability": r.extras.get("transfer_probability", math.nan)}
    summary = r.to_record()
    summary["tuning"] = protocols._jsonable(dataclasses.asdict(tun))
    return Result([row], summary)


def _remote_gate(p, seed):
    middle = {"cz": None, "hadamard": np.kron(spin.HADAMARD, np.eye(2))}.get(p["middle"], "bad")
    if isinstance(middle, str):
        raise ConfigError(f"unknown middle gate {p['middle']!r}")
    r = protocols.remote_gate_circuit(p["n_chain"], p["k"], middle)
    return Result([{"n_chain": p["n_chain"], "fidelity": r.fidelity, **r.extras}], r.to_record())


def _ss_budget(p, seed):
    b = budget.ss_budget(budget.SSBudgetParams(p["N"], p["kappa"], p["omega"], p["delta_g"], p["t_ss"], p["T1"],
                                               p["T2"], p["include_t2"]))
    return Result([{"term": k, "value": v} for k, v in b.terms.items()] + [{"term": "total", "value": b.total}],
                  b.to_dict())


def _ffst_budget(p, seed):
    prm = budget.FFSTBudgetParams(p["N"], p["kappa"], p["omega_n"], p["omega"], p["delta_g"], p["T1"],
                                  p["spacing"])
    b = budget.ffst_budget(prm)
    rows = [{"term": k, "value": v} for k, v in b.terms.items()] + [{"term": "total", "value": b.total}]
    return Result(rows, {**b.to_dict(), "t_ffst": prm.t_ffst, "g": prm.g, "delta": prm.delta})


def _optimize(p, seed):
    method = p["method"].upper()
    N = p["N"] or (18 if method == "SS" else 7)
    kappa = p["kappa"] or (8.7e3 if method == "SS" else 12.6e3)
    if method == "SS":
        opt = budget.optimize_ss(N, kappa, p["delta_g"], p["T1"], p["bounds"])
    elif method == "FFST":
        opt = budget.optimize_ffst(N, kappa, p["delta_g"], p["T1"], p["spacing"], p["bounds"])
    else:
        raise ConfigError(f"method must be SS or FFST, got {p['method']!r}")
    d = opt.as_dict()
    row = {k: v for k, v in d.items() if isinstance(v, (int, float, str))}
    row["total"] = opt.budget.total
    return Result([row], {"method": method, "N": N, "kappa": kappa, **d},
                  boundary=opt.on_boundary)


def _contours(p, seed):
    t = np.geomspace(p["t_min"], p["t_max"], p["t_points"])
    grid = budget.contour_grid(p["method"].upper(), p["T1_values"], t, p["N"], p["kappa"], p["delta_g"],
                               p["spacing"])
    rows = [{"T1": float(a), "t_total": float(b), "infidelity": float(grid.values[i, j])}
            for i, a in enumerate(grid.T1) for j, b in enumerate(grid.t_total)]
    summary = grid.sidecar()
    summary["minimum_over_time"] = {repr(float(a)): grid.minimum_over_time(a) for a in grid.T1}
    return Result(rows, summary)


def _freq_plan(p, seed):
    c = _constants(p)
    plan = planner.build_frequency_plan(p["gradient_per_row"], p["rows"], p["offsets"], p["nv_base"], c)
    rows = [dataclasses.asdict(ln) for ln in plan.lines]
    summary = plan.summary()
    if p["zeta_scan"]:
        cands = planner.search_gradient(p["zeta_scan"], p["rows"], p["offsets"], p["nv_base"], c)
        summary["gradient_scan"] = [dataclasses.asdict(x) for x in cands]
    return Result(rows, summary)


def _layout(p, seed):
    cfg = planner.LayoutConfig(p["h"], p["w"], p["plaquette_x"], p["plaquette_y"], p["link_min"], p["link_max"],
                               Fraction(p["stagger"]).limit_denominator(1000), p["nv_sites"])
    lay = planner.generate_layout(cfg)
    rows = list(csv.DictReader(io.StringIO(lay.to_csv())))
    return Result(rows, {**lay.summary(), "ok": lay.ok})


def _yield(p, seed):
    rep = planner.yield_monte_carlo(p["p_conversion"], p["sites"], p["trials"], seed)
    return Result([rep.summary()], rep.summary())


def _refocus_check(p, seed):
    full = planner.sawtooth_model(p["n_sites"], 2)
    nn = planner.sawtooth_model(p["n_sites"], 1)
    T = p["kappa_t"] / max(nn.meta["kappas"])
    rows = []
    for n in p["steps"]:
        plan = planner.echo_schedule_nnn(T / n, n, p["n_sites"])
        rows.append({"steps": n, "segment_time": T / n, "error": planner.trotter_error(plan, full, nn)})
    slope = float(np.polyfit(np.log([r["segment_time"] for r in rows]), np.log([r["error"] for r in rows]), 1)[0])
    table = {k: {t: str(v) for t, v in d.items()} for k, d in planner.sign_average_table().items()}
    return Result(rows, {"sign_averages": table, "slope": slope, "simulated_time": T})


# (runner, defaults); ``None`` marks "derived from other inputs".
EXPERIMENTS = {
    "register-gates": (_register_gates, {"rabi": None, "constants": {}}),
    "adiabatic-swap": (_adiabatic_swap, {"kappa": 10e3, "kappa_t": [10, 20, 40], "omega_max": None,
                                         "shape": "local", "coupling_scale": 1.0}),
    "sequential-swap": (_sequential_swap, {"n_chain": 4, "kappa": 10e3, "kappa_t": 20.0, "omega_max": None,
                                           "shape": "local", "mode": "quadratic"}),
    "ffst": (_ffst, {"n_chain": 4, "kappa": 12.6e3, "k": None, "g_over_kappa": 0.05, "omega_n": None,
                     "detune": 0.0, "unpolarized": True}),
    "remote-gate": (_remote_gate, {"n_chain": 3, "k": None, "middle": "cz"}),
    "ss-budget": (_ss_budget, {"N": 18, "kappa": 8.7e3, "omega": 450e3, "delta_g": 10e6, "t_ss": 3e-3 / 18,
                               "T1": 0.25, "T2": 10e-3, "include_t2": False}),
    "ffst-budget": (_ffst_budget, {"N": 7, "kappa": 12.6e3, "omega_n": 285e3, "omega": 95e3, "delta_g": 10e6,
                                   "T1": 0.25, "spacing": "kappa_over_n"}),
    "optimize": (_optimize, {"method": "SS", "N": None, "kappa": None, "delta_g": 10e6, "T1": 0.25,
                             "spacing": "kappa_over_n", "bounds": None}),
    "contours": (_contours, {"method": "FFST", "T1_values": [0.05, 0.1, 0.25, 0.5, 1.0], "t_min": 1e-4,
                             "t_max": 1.0, "t_points": 41, "N": None, "kappa": None, "delta_g": 10e6,
                             "spacing": "kappa_over_n"}),
    "freq-plan": (_freq_plan, {"gradient_per_row": 150e6, "rows": 64, "offsets": "rounded", "nv_base": None,
                               "zeta_scan": [], "constants": {}}),
    "layout": (_layout, {"h": 6.0, "w": 19.0, "plaquette_x": 525.0, "plaquette_y": 650.0, "link_min": 19.5,
                         "link_max": 20.5, "stagger": 0.5, "nv_sites": 8}),
    "yield": (_yield, {"p_conversion": 0.4, "sites": 8, "trials": 100_000}),
    "refocus-check": (_refocus_check, {"n_sites": 8, "kappa_t": 0.5, "steps": [8, 16, 32]}),
}
_CONSTANT_FIELDS = {f.name for f in dataclasses.fields(PhysicalConstants)}


# ---------------------------------------------------------------- config

def parse_config(doc: dict, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    version = doc.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config version {version!r}")
    name = doc.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; expected one of {sorted(EXPERIMENTS)}")
    defaults = EXPERIMENTS[name][1]
    given = doc.get("parameters", {}) or {}
    if not isinstance(given, dict):
        raise ConfigError("parameters must be an object")
    bad = set(given) - set(defaults)
    if bad:
        raise ConfigError(f"unknown parameters for {name}: {sorted(bad)}")
    params = {**defaults, **given}
    consts = params.get("constants", {})
    if consts:
        if not isinstance(consts, dict) or set(consts) - _CONSTANT_FIELDS:
            raise ConfigError(f"unknown constants: {sorted(set(consts) - _CONSTANT_FIELDS)}")
        params["constants"] = consts
    axes = []
    sweep = doc.get("sweep") or {}
    if sweep:
        if not isinstance(sweep, dict) or set(sweep) - {"axes"}:
            raise ConfigError("sweep must be {'axes': [...]}")
        for ax in sweep.get("axes", []):
            if not isinstance(ax, dict) or set(ax) != {"name", "values"}:
                raise ConfigError("each sweep axis needs exactly 'name' and 'values'")
            if ax["name"] not in defaults:
                raise ConfigError(f"sweep axis {ax['name']!r} is not a parameter of {name}")
            if not isinstance(ax["values"], list) or not ax["values"]:
                raise ConfigError(f"sweep axis {ax['name']!r} needs a non-empty value list")
            axes.append((ax["name"], tuple(ax["values"])))
    if len(axes) > MAX_AXES:
        raise ConfigError(f"at most {MAX_AXES} sweep axes")
    if math.prod(len(v) for _, v in axes) > MAX_CELLS:
        raise ConfigError(f"sweep exceeds {MAX_CELLS} cells")
    s = doc.get("seed", 0) if seed is None else seed
    if not isinstance(s, int) or isinstance(s, bool):
        raise ConfigError("seed must be an integer")
    return ExperimentConfig(name, params, s, out or doc.get("output_dir"), tuple(axes), version)


# ---------------------------------------------------------------- execution

def _jsonable(obj):
    return protocols._jsonable(obj)


def _write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(rows) -> str:
    buf = io.StringIO()
    if rows:
        fields = list(dict.fromkeys(k for r in rows for k in r))
        w = csv.DictWriter(buf, fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _scalars(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_scalars(v, key + "."))
        elif isinstance(v, (bool, int, float, str)) or v is None:
            out[key] = v
    return out


def run_config(cfg: ExperimentConfig, threads: int = 0) -> tuple[list, dict, bool]:
    fn = EXPERIMENTS[cfg.experiment][0]
    if not cfg.sweep:
        res = fn(cfg.parameters, cfg.seed)
        return res.rows, _jsonable(res.summary), res.boundary
    names = [n for n, _ in cfg.sweep]
    cells = list(itertools.product(*(v for _, v in cfg.sweep)))
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(cells), dtype=np.uint32)

    def one(i):
        p = {**cfg.parameters, **dict(zip(names, cells[i]))}
        return fn(p, int(seeds[i]))

    workers = threads or min(32, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, range(len(cells))))
    rows, summaries = [], []
    for i, (cell, res) in enumerate(zip(cells, results)):
        head = {"cell": i, **dict(zip(names, cell))}
        rows.append({**head, **_scalars(_jsonable(res.summary))})
        summaries.append({**head, "summary": _jsonable(res.summary)})
    return rows, {"axes": names, "cells": summaries}, any(r.boundary for r in results)


def execute(cfg: ExperimentConfig, threads: int = 0) -> dict:
    """Run and write outputs; returns the manifest."""
    if not cfg.output_dir:
        raise ConfigError("no output directory (use --out or output_dir)")
    os.makedirs(cfg.output_dir, exist_ok=True)
    start = time.perf_counter()
    resolved = json.dumps(_jsonable(cfg.resolved()), indent=2, sort_keys=True) + "\n"
    _write_atomic(os.path.join(cfg.output_dir, "resolved_config.json"), resolved)
    rows, summary, boundary = run_config(cfg, threads)
    summary = {"experiment": cfg.experiment, "boundary_warning": boundary, "result": summary}
    files = {
        "data.csv": _csv_text(rows),
        "summary.json": json.dumps(summary, indent=2, sort_keys=True, allow_nan=True) + "\n",
    }
    for name, text in files.items():
        _write_atomic(os.path.join(cfg.output_dir, name), text)
    manifest = {
        "config_sha256": hashlib.sha256(resolved.encode()).hexdigest(),
        "tool_version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "files": ["resolved_config.json", *files],
        "boundary_warning": boundary,
    }
    _write_atomic(os.path.join(cfg.output_dir, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _fail(code: int, kind: str, msg: str) -> int:
    print(json.dumps({"error": kind, "message": msg, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="nvbus", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--strict", action="store_true", help="exit 4 on boundary optima")
        sp.add_argument("--threads", type=int, default=0, help="sweep workers (0 = auto)")
    args = ap.parse_args(argv)
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
        cfg = parse_config(doc, args.seed, args.out)
        if args.command == "run" and cfg.sweep:
            raise ConfigError("config has sweep axes; use 'nvbus sweep'")
        manifest = execute(cfg, args.threads)
    except (ConfigError, json.JSONDecodeError, OSError, TypeError, KeyError) as exc:
        return _fail(EXIT_SCHEMA, "schema", str(exc))
    except (IntegrationError, DimensionError, ValueError, ArithmeticError, np.linalg.LinAlgError,
            protocols.SelectivityError, protocols.LocalizationError) as exc:
        return _fail(EXIT_NUMERIC, "numerical", f"{type(exc).__name__}: {exc}")
    if manifest["boundary_warning"] and args.strict:
        return _fail(EXIT_BOUNDARY, "boundary", "optimum on search-box boundary")
    print(json.dumps({"status": "ok", "output_dir": cfg.output_dir, "files": manifest["files"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
