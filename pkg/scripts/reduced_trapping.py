#!/usr/bin/env python3
"""Reduced modulation dynamics: trapping at the rate fixed point b*.

Integrates the (b, lam) modulation ODE from initial rates on both sides
of b* and reports the convergence of b and of lam / sqrt(2 b* (T - t)).
"""

import argparse

import numpy as np

from nlsblowup.dynamics import bstar, integrate_reduced, selfsimilar_ratio


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma-c", type=float, default=1e-3)
    ap.add_argument("--lam-floor", type=float, default=1e-40,
                    help="follow lambda this deep so b has time to settle")
    ap.add_argument("--offsets", type=str, default="0.8,0.9,1.1,1.2",
                    help="initial b as multiples of b*")
    args = ap.parse_args()

    bs = bstar(args.sigma_c)
    print(f"sigma_c = {args.sigma_c:g}, b* = {bs:.6f}")
    print(f"{'b0/b*':>6} {'b_final/b*':>11} {'T':>12} "
          f"{'speed min':>10} {'speed max':>10}")
    for tok in args.offsets.split(","):
        mult = float(tok)
        traj = integrate_reduced(args.sigma_c, mult * bs, 1.0,
                                 lam_floor=args.lam_floor)
        ratio = selfsimilar_ratio(traj, b_star=bs)
        final = traj.lam <= 100.0 * traj.lam[-1]
        lo, hi = float(np.min(ratio[final])), float(np.max(ratio[final]))
        print(f"{mult:6.2f} {traj.b[-1] / bs:11.6f} {traj.T:12.6f} "
              f"{lo:10.5f} {hi:10.5f}")


if __name__ == "__main__":
    main()
