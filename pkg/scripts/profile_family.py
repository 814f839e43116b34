#!/usr/bin/env python3
"""Self-similar profile family: invariants of Q_b over a range of b.

Builds the profile at each b and tabulates the mass excess, Hamiltonian,
virial moment against its -b/2 * int y^2 Q^2 prediction, and the phase
eigenvalue mu_b against its small-b limit.
"""

import argparse

from nlsblowup.groundstate import solve_ground_state
from nlsblowup.profiles import build_profile, mu_limit, profile_invariants


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=5.0)
    ap.add_argument("--N", type=int, default=1)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--b-list", type=str, default="0.05,0.10,0.15,0.20")
    args = ap.parse_args()

    gs = solve_ground_state(args.p, args.N)
    mu0 = mu_limit(gs)
    print(f"ground state: Q(0) = {gs.Q0:.8f}, mass = {gs.mass:.6f}, "
          f"mu_b small-b limit = {mu0:.6f}")
    print(f"{'b':>6} {'mass_excess':>12} {'energy':>11} "
          f"{'virial':>10} {'virial_pred':>12} {'mu_b':>9}")
    for tok in args.b_list.split(","):
        b = float(tok)
        prof = build_profile(b, args.p, args.N, eta=args.eta)
        inv = profile_invariants(prof, gs=gs)
        print(f"{b:6.3f} {inv['mass_excess']:12.5e} "
              f"{inv['energy']:11.3e} {inv['virial_moment']:10.5f} "
              f"{inv['virial_expected']:12.5f} {prof.mu_b:9.5f}")


if __name__ == "__main__":
    main()
