#!/usr/bin/env python3
"""Radiation flux law: Gamma_b against the e^{-2 theta(2)/b} prediction.

Sweeps b, solves the outgoing radiation problem at each value, and fits
the slope of log Gamma_b versus -2 theta(2)/b.  The slope tends to 1 from
below as b decreases.
"""

import argparse

import numpy as np

from nlsblowup.groundstate import critical_exponent
from nlsblowup.radiation import gamma_sweep, theta


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=2)
    ap.add_argument("--b-list", type=str, default="0.30,0.25,0.20,0.15")
    ap.add_argument("--eta", type=float, default=0.1)
    args = ap.parse_args()

    b_list = [float(x) for x in args.b_list.split(",")]
    p = critical_exponent(args.N)
    rows = gamma_sweep(b_list, p, args.N, eta=args.eta)

    print(f"{'b':>6} {'Gamma_b':>12} {'flatness':>9} "
          f"{'-b log(G)/pi':>13}")
    for r in rows:
        print(f"{r['b']:6.3f} {r['Gamma_b']:12.4e} {r['flatness']:9.4f} "
              f"{r['minus_b_log_gamma_over_pi']:13.5f}")

    x = np.array([-2.0 * theta(2.0) / r["b"] for r in rows])
    y = np.log([r["Gamma_b"] for r in rows])
    slope = np.polyfit(x, y, 1)[0]
    print(f"\nslope of log Gamma_b vs -2 theta(2)/b: {slope:.4f} "
          f"(-> 1 as b -> 0)")


if __name__ == "__main__":
    main()
