"""Experiment CLI: subcommand dispatch with deterministic run directories.

Each invocation writes its artifacts under <out-root>/<timestamp>-<hash>/
and echoes a manifest JSON listing every file produced.  Data files contain
no wall-clock values, so identical configs give bit-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .groundstate import (
    SolverFailure,
    critical_exponent,
    p_from_sigma,
    sigma_c,
    solve_ground_state,
    kernel_checks,
)
from . import dynamics, nlse, profiles, radiation, spectral
from .grid import RadialField

EX_SCHEMA = 64
EX_SOLVER = 1


# --------------------------------------------------------------------------
# run-directory plumbing
# --------------------------------------------------------------------------

def _out_root():
    return Path(os.environ.get("NLSBLOWUP_OUT", "runs"))


def _run_dir(config):
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    digest = hashlib.sha256(blob).hexdigest()[:10]
    stamp = time.strftime("%Y%m%dT%H%M%S")
    path = _out_root() / f"{stamp}-{digest}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _finish(run_dir, config, artifacts):
    manifest = {
        "config": config,
        "artifacts": [str(Path(a).name) for a in artifacts],
        "run_dir": str(run_dir),
    }
    _write_json(run_dir / "manifest.json", manifest)
    print(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return 0


# --------------------------------------------------------------------------
# subcommand handlers
# --------------------------------------------------------------------------

def _cmd_groundstate(args):
    config = {"cmd": "groundstate", "p": args.p, "N": args.N,
              "r_max": args.r_max, "n": args.n}
    run_dir = _run_dir(config)
    gs = solve_ground_state(args.p, args.N, r_max=args.r_max, n=args.n)
    checks = kernel_checks(gs)
    report = {
        "p": gs.p, "N": gs.N, "sigma_c": gs.sigma_c, "Q0": gs.Q0,
        "mass": gs.mass, "ymass": gs.ymass, "energy": gs.energy,
        "grad_sq": gs.grad_sq, **checks,
    }
    _write_json(run_dir / "groundstate.json", report)
    gs.field().to_csv(run_dir / "Q.csv")
    return _finish(run_dir, config,
                   ["groundstate.json", "Q.csv"])


def _cmd_profile(args):
    config = {"cmd": "profile", "p": args.p, "N": args.N, "b": args.b,
              "eta": args.eta}
    run_dir = _run_dir(config)
    prof = profiles.build_profile(args.b, args.p, args.N, eta=args.eta)
    rep = profiles.profile_invariants(prof)
    rep.update({"b": prof.b, "mu_b": prof.mu_b, "lam_b": prof.lam_b,
                "R_b": prof.R_b, "R_b_minus": prof.R_b_minus,
                "P0_head": prof.P0[0]})
    _write_json(run_dir / "profile.json", rep)
    RadialField(prof.grid, prof.Q_b).to_csv(run_dir / "Qb.csv")
    return _finish(run_dir, config, ["profile.json", "Qb.csv"])


def _cmd_profile_sweep(args):
    b_list = [float(x) for x in args.b_list.split(",")]
    config = {"cmd": "profile-sweep", "p": args.p, "N": args.N,
              "eta": args.eta, "b_list": b_list}
    run_dir = _run_dir(config)
    gs = solve_ground_state(args.p, args.N)
    rows = []
    for b in b_list:
        prof = profiles.build_profile(b, args.p, args.N, eta=args.eta,
                                      with_correction=False)
        rows.append([b, prof.P0[0],
                     prof.grid.mass(prof.P0_tilde) - gs.mass, prof.R_b])
    _write_csv(run_dir / "profile_sweep.csv",
               ["b", "P0_head", "mass_excess", "R_b"], rows)
    return _finish(run_dir, config, ["profile_sweep.csv"])


def _cmd_radiation(args):
    config = {"cmd": "radiation", "p": args.p, "N": args.N, "b": args.b,
              "eta": args.eta}
    run_dir = _run_dir(config)
    sol = radiation.radiation_for_profile(args.b, args.p, args.N,
                                          eta=args.eta)
    _write_json(run_dir / "radiation.json", {
        "b": sol.b, "Gamma_b": sol.Gamma_b, "flatness": sol.flatness,
        "grad_sq": sol.grad_sq, "residual": sol.residual,
        "window": list(sol.window),
    })
    sol.field().to_csv(run_dir / "zeta.csv")
    return _finish(run_dir, config, ["radiation.json", "zeta.csv"])


def _cmd_gamma_sweep(args):
    b_list = [float(x) for x in args.b_list.split(",")]
    config = {"cmd": "gamma-sweep", "p": args.p, "N": args.N,
              "eta": args.eta, "b_list": b_list}
    run_dir = _run_dir(config)
    rows = radiation.gamma_sweep(b_list, args.p, args.N, eta=args.eta)
    _write_csv(run_dir / "gamma_sweep.csv",
               ["b", "Gamma_b", "minus_b_log_gamma_over_pi", "flatness",
                "grad_sq"],
               [[r["b"], r["Gamma_b"], r["minus_b_log_gamma_over_pi"],
                 r["flatness"], r["grad_sq"]] for r in rows])
    return _finish(run_dir, config, ["gamma_sweep.csv"])


def _cmd_spectral(args):
    config = {"cmd": "spectral", "N": args.N, "r_max": args.r_max,
              "n": args.n}
    run_dir = _run_dir(config)
    delta1, rows = spectral.verify_spectral_property(
        args.N, r_max=args.r_max, n=args.n)
    _write_json(run_dir / "spectral.json", {
        "N": args.N, "delta1": delta1, "positive": bool(delta1 > 0),
        "sectors": rows,
    })
    return _finish(run_dir, config, ["spectral.json"])


def _cmd_reduced(args):
    config = {"cmd": "reduced", "sigma_c": args.sigma_c, "b0": args.b0,
              "gamma_source": args.gamma_source}
    run_dir = _run_dir(config)
    gamma = None
    if args.gamma_source == "table":
        rows = radiation.gamma_sweep([0.30, 0.25, 0.20, 0.15],
                                     critical_exponent(args.N), args.N)
        gamma = dynamics.gamma_from_table([r["b"] for r in rows],
                                          [r["Gamma_b"] for r in rows])
    b0 = args.b0 if args.b0 is not None else dynamics.bstar(args.sigma_c)
    traj = dynamics.integrate_reduced(args.sigma_c, b0, gamma=gamma)
    _write_csv(run_dir / "reduced.csv", ["s", "t", "b", "lam"],
               np.column_stack([traj.s, traj.t, traj.b, traj.lam]).tolist())
    _write_json(run_dir / "reduced.json", {
        "sigma_c": args.sigma_c, "b0": b0, "T": traj.T,
        "exit_side": traj.exit_side, "b_final": traj.b[-1],
    })
    return _finish(run_dir, config, ["reduced.csv", "reduced.json"])


def _cmd_bstar(args):
    if args.sigma_c is None:
        sc = sigma_c(args.p, args.N)
    else:
        sc = args.sigma_c
    config = {"cmd": "bstar", "p": args.p, "N": args.N, "sigma_c": sc}
    run_dir = _run_dir(config)
    _write_json(run_dir / "bstar.json", {
        "p": args.p, "N": args.N, "sigma_c": sc,
        "b_star": dynamics.bstar(sc),
    })
    return _finish(run_dir, config, ["bstar.json"])


_SIM_SCHEMA = {f.name: f.type for f in dataclasses.fields(nlse.SimConfig)}


def _load_sim_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        print(f"config parse error: line {exc.lineno}: {exc.msg}",
              file=sys.stderr)
        raise SystemExit(EX_SCHEMA)
    unknown = sorted(set(raw) - set(_SIM_SCHEMA))
    if unknown:
        print(f"config schema violation: unknown field(s) {unknown}; "
              f"known fields: {sorted(_SIM_SCHEMA)}", file=sys.stderr)
        raise SystemExit(EX_SCHEMA)
    if "table_span" in raw:
        raw["table_span"] = tuple(raw["table_span"])
    try:
        return nlse.SimConfig(**raw)
    except (TypeError, ValueError) as exc:
        print(f"config schema violation: {exc}", file=sys.stderr)
        raise SystemExit(EX_SCHEMA)


def _cmd_simulate(args):
    cfg = _load_sim_config(args.config)
    config = {"cmd": "simulate", **dataclasses.asdict(cfg)}
    run_dir = _run_dir(config)
    trace, report = nlse.run_selfsimilar(cfg)
    _write_csv(run_dir / "trace.csv",
               ["t", "s", "lam", "b", "gamma", "mass", "energy",
                "grad_eps", "loc_eps", "mod_residual", "flux", "J"],
               [[r.t, r.s, r.lam, r.b, r.gamma, r.mass, r.energy,
                 r.grad_eps, r.loc_eps, r.mod_residual, r.flux, r.J]
                for r in trace])
    out = {
        "status": report.status, "exit_code": report.exit_code,
        "T": report.T, "b_fit": report.b_fit, "corr": report.corr,
        "trapping_band": report.band,
        "speed_ratio": list(report.speed_ratio),
        "eps_fraction": report.eps_fraction,
    }
    if report.ustar_r.size >= 8:
        sc = sigma_c(cfg.p, cfg.N)
        Rs, vals = nlse.concentration_scan(report.ustar_r, report.ustar_sq,
                                           sc, cfg.N)
        _write_csv(run_dir / "concentration.csv",
                   ["R", "weighted_mass"], np.column_stack([Rs, vals]).tolist())
        out["concentration_flatness"] = float(np.max(vals) / np.min(vals))
    _write_json(run_dir / "report.json", out)
    artifacts = ["trace.csv", "report.json"]
    if (run_dir / "concentration.csv").exists():
        artifacts.append("concentration.csv")
    _finish(run_dir, config, artifacts)
    return report.exit_code


def _cmd_report(args):
    run_dir = Path(args.run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        print(f"no manifest in {run_dir}", file=sys.stderr)
        return EX_SOLVER
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    summary = {"run_dir": str(run_dir), "artifacts": manifest["artifacts"]}
    for name in manifest["artifacts"]:
        if name.endswith(".json"):
            with open(run_dir / name) as fh:
                summary[name] = json.load(fh)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _build_parser():
    top = argparse.ArgumentParser(
        prog="nlsblowup",
        description="Self-similar NLS blow-up laboratory")
    sub = top.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("groundstate", help="solve the ground state Q_p")
    g.add_argument("--p", type=float, required=True)
    g.add_argument("--N", type=int, default=1)
    g.add_argument("--r-max", type=float, default=25.0)
    g.add_argument("--n", type=int, default=12501)
    g.set_defaults(func=_cmd_groundstate)

    pr = sub.add_parser("profile", help="self-similar profile Q_b")
    pr.add_argument("--p", type=float, required=True)
    pr.add_argument("--N", type=int, default=1)
    pr.add_argument("--b", type=float, required=True)
    pr.add_argument("--eta", type=float, default=0.1)
    pr.set_defaults(func=_cmd_profile)

    ps = sub.add_parser("profile-sweep", help="P0 family over a b-list")
    ps.add_argument("--p", type=float, required=True)
    ps.add_argument("--N", type=int, default=1)
    ps.add_argument("--eta", type=float, default=0.1)
    ps.add_argument("--b-list", type=str, required=True,
                    help="comma-separated b values")
    ps.set_defaults(func=_cmd_profile_sweep)

    ra = sub.add_parser("radiation", help="outgoing radiation zeta_b")
    ra.add_argument("--p", type=float, required=True)
    ra.add_argument("--N", type=int, default=2)
    ra.add_argument("--b", type=float, required=True)
    ra.add_argument("--eta", type=float, default=0.1)
    ra.set_defaults(func=_cmd_radiation)

    gsw = sub.add_parser("gamma-sweep", help="Gamma_b over a b-list")
    gsw.add_argument("--p", type=float, required=True)
    gsw.add_argument("--N", type=int, default=2)
    gsw.add_argument("--eta", type=float, default=0.1)
    gsw.add_argument("--b-list", type=str, required=True)
    gsw.set_defaults(func=_cmd_gamma_sweep)

    sp = sub.add_parser("spectral", help="coercivity constant delta_1")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--r-max", type=float, default=30.0)
    sp.add_argument("--n", type=int, default=1200)
    sp.set_defaults(func=_cmd_spectral)

    rd = sub.add_parser("reduced", help="reduced modulation ODE")
    rd.add_argument("--sigma-c", type=float, required=True)
    rd.add_argument("--b0", type=float, default=None)
    rd.add_argument("--N", type=int, default=2)
    rd.add_argument("--gamma-source", choices=["analytic", "table"],
                    default="analytic")
    rd.set_defaults(func=_cmd_reduced)

    bs = sub.add_parser("bstar", help="rate fixed point b*")
    bs.add_argument("--p", type=float, default=None)
    bs.add_argument("--N", type=int, default=1)
    bs.add_argument("--sigma-c", type=float, default=None)
    bs.set_defaults(func=_cmd_bstar)

    sim = sub.add_parser("simulate", help="end-to-end PDE run")
    sim.add_argument("--config", type=str, required=True,
                     help="JSON file with SimConfig fields")
    sim.set_defaults(func=_cmd_simulate)

    rp = sub.add_parser("report", help="summarize a run directory")
    rp.add_argument("--run-dir", type=str, required=True)
    rp.set_defaults(func=_cmd_report)
    return top


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags; the contract is 64 for schema errors
        if exc.code not in (0, None):
            raise SystemExit(EX_SCHEMA)
        raise
    if getattr(args, "cmd", None) == "bstar" and args.p is None \
            and args.sigma_c is None:
        print("bstar needs --p or --sigma-c", file=sys.stderr)
        return EX_SCHEMA
    try:
        return args.func(args)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EX_SOLVER


if __name__ == "__main__":
    sys.exit(main())
