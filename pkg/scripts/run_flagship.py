#!/usr/bin/env python3
"""Flagship run: slightly supercritical self-similar blow-up, end to end.

Solves the exact stationary rescaled state, evolves it with dynamic
rescaling across >= 3 decades of focusing, and prints the blow-up law
diagnostics (rate fit, trapping band, concentration compactness).
"""

import argparse
import json

import numpy as np

from nlsblowup.groundstate import p_from_sigma, sigma_c
from nlsblowup.nlse import SimConfig, concentration_scan, run_selfsimilar


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma-c", type=float, default=5e-3)
    ap.add_argument("--N", type=int, default=1)
    ap.add_argument("--lam-floor", type=float, default=1e-3)
    ap.add_argument("--s-max", type=float, default=40.0)
    ap.add_argument("--trace-out", type=str, default=None,
                    help="optional CSV path for the modulation trace")
    args = ap.parse_args()

    p = p_from_sigma(args.sigma_c, args.N)
    cfg = SimConfig(p=p, N=args.N, lam_floor=args.lam_floor,
                    s_max=args.s_max)
    trace, rep = run_selfsimilar(cfg)

    sc = sigma_c(p, args.N)
    out = {
        "sigma_c": sc,
        "p": p,
        "status": rep.status,
        "b_fit": rep.b_fit,
        "b_star_leading_order": float(np.pi / np.log(1.0 / sc)),
        "corr_lam2_vs_t": rep.corr,
        "trapping_band": rep.band,
        "speed_ratio": list(rep.speed_ratio),
        "eps_fraction": rep.eps_fraction,
        "log_sigma_over_rate_law": float(np.log(sc) / (-np.pi / rep.b_fit)),
        "decades_of_focusing": float(np.log10(trace[0].lam
                                              / trace[-1].lam)),
    }
    if rep.ustar_r.size >= 8:
        Rs, vals = concentration_scan(rep.ustar_r, rep.ustar_sq, sc, args.N)
        out["concentration_variation"] = float(np.max(vals) / np.min(vals)
                                               - 1.0)
    print(json.dumps(out, indent=2))

    if args.trace_out:
        rows = np.array([[r.t, r.s, r.lam, r.b, r.grad_eps, r.loc_eps,
                          r.mod_residual] for r in trace])
        np.savetxt(args.trace_out, rows, delimiter=",",
                   header="t,s,lam,b,grad_eps,loc_eps,mod_residual",
                   comments="")
        print(f"trace written to {args.trace_out}")


if __name__ == "__main__":
    main()
