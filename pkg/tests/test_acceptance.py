"""Acceptance gate: the eleven pinned criteria, one pass/fail line each.

Run with `pytest -v -s tests/test_acceptance.py` to see the lines; every
criterion is asserted at its pinned tolerance, so the pytest verdict and
the printed line always agree.
"""

import time

import numpy as np
import pytest
from scipy.integrate import quad

from nlsblowup.dynamics import bstar, integrate_reduced, selfsimilar_ratio
from nlsblowup.groundstate import (
    critical_exponent,
    kernel_checks,
    p_from_sigma,
    sigma_c,
    solve_ground_state,
    solve_rho,
)
from nlsblowup.nlse import (
    SimConfig,
    concentration_scan,
    run_conservation_control,
    run_selfsimilar,
)
from nlsblowup.profiles import build_profile, profile_invariants
from nlsblowup.radiation import gamma_sweep, theta
from nlsblowup.spectral import verify_spectral_property


def _line(num, name, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num:02d} [{verdict}] {name}: {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


# ---------------------------------------------------------------------------
# 1. ground-state oracle
# ---------------------------------------------------------------------------

def test_criterion_01_groundstate_oracle():
    t0 = time.perf_counter()
    gs = solve_ground_state(3.0, 1)
    sech = np.sqrt(2.0) / np.cosh(gs.grid.r)
    err_head = abs(gs.Q0 - np.sqrt(2.0))
    err_prof = float(np.max(np.abs(gs.Q - sech)))
    dt = time.perf_counter() - t0
    ok = err_head < 1e-8 and err_prof < 1e-6 and dt < 1.0
    _line(1, "ground-state oracle",
          ok, f"|Q(0)-sqrt2|={err_head:.2e} (<1e-8), "
              f"sup|Q-sech|={err_prof:.2e} (<1e-6), {dt:.2f}s (<1s)")


# ---------------------------------------------------------------------------
# 2. kernel identities
# ---------------------------------------------------------------------------

def test_criterion_02_kernel_identities():
    t0 = time.perf_counter()
    worst_lm, worst_lp = 0.0, 0.0
    for (N, p) in ((1, 3.0), (2, 3.0), (3, 7.0 / 3.0)):
        checks = kernel_checks(solve_ground_state(p, N))
        worst_lm = max(worst_lm, checks["Lminus_Q"])
        worst_lp = max(worst_lp, checks["Lplus_LamQ_plus_2Q"])
    dt = time.perf_counter() - t0
    ok = worst_lm <= 1e-8 and worst_lp <= 1e-6 and dt < 5.0
    _line(2, "kernel identities",
          ok, f"max|L-Q|/|Q|={worst_lm:.2e} (<=1e-8), "
              f"max|L+LamQ+2Q|/|Q|={worst_lp:.2e} (<=1e-6), "
              f"{dt:.2f}s (<5s)")


# ---------------------------------------------------------------------------
# 3. rho pairing identity
# ---------------------------------------------------------------------------

def test_criterion_03_rho_identity():
    gs = solve_ground_state(3.2, 1)
    rho = solve_rho(gs)
    lhs = 2.0 * gs.grid.dot(rho, gs.Q)
    rhs = (1.0 + gs.sigma_c) / 4.0 * gs.ymass
    rel = abs(lhs / rhs - 1.0)
    ok = rel < 1e-5
    _line(3, "rho identity",
          ok, f"|2(rho,Q)/(((1+sc)/4)|yQ|^2) - 1| = {rel:.2e} (<1e-5)")


# ---------------------------------------------------------------------------
# 4. theta closed form
# ---------------------------------------------------------------------------

def test_criterion_04_theta_closed_form():
    exact = theta(2.0) == np.pi / 2.0
    worst = 0.0
    for w in np.linspace(0.0, 2.0, 41):
        val, _ = quad(lambda z: np.sqrt(1.0 - z * z / 4.0), 0.0, w)
        worst = max(worst, abs(theta(w) - val))
    ok = exact and worst < 1e-10
    _line(4, "theta closed form",
          ok, f"theta(2)==pi/2 exact: {exact}, "
              f"max |closed-quadrature| = {worst:.2e} (<1e-10)")


# ---------------------------------------------------------------------------
# 5. Gamma_b law
# ---------------------------------------------------------------------------

def test_criterion_05_gamma_law():
    t0 = time.perf_counter()
    b_list = [0.30, 0.25, 0.20, 0.15]
    rows = gamma_sweep(b_list, critical_exponent(2), 2)
    flat = max(r["flatness"] for r in rows)
    x = np.array([-2.0 * theta(2.0) / r["b"] for r in rows])
    y = np.log([r["Gamma_b"] for r in rows])
    slope = float(np.polyfit(x, y, 1)[0])
    # pairwise slopes between consecutive b: must improve toward 1 as b
    # decreases (rows come back in the order of b_list: decreasing b)
    pair = np.diff(y) / np.diff(x)
    monotone = bool(np.all(np.diff(pair) > 0)) and pair[-1] <= 1.0
    dt = time.perf_counter() - t0
    ok = flat <= 0.25 and 0.8 <= slope <= 1.2 and monotone and dt < 120.0
    _line(5, "Gamma_b law",
          ok, f"flatness max={flat:.3f} (<=0.25), slope={slope:.3f} "
              f"(in [0.8,1.2]), pairwise slopes {np.round(pair, 3)} "
              f"monotone to 1: {monotone}, {dt:.1f}s (<120s)")


# ---------------------------------------------------------------------------
# 6. spectral property
# ---------------------------------------------------------------------------

def test_criterion_06_spectral_property():
    t0 = time.perf_counter()
    ok = True
    details = []
    for N in range(1, 6):
        d1, _ = verify_spectral_property(N)
        d2, _ = verify_spectral_property(N, n=2400)
        stable = abs(d2 / d1 - 1.0) <= 0.10
        ok = ok and d1 > 0 and d2 > 0 and stable
        details.append(f"N={N}: {d1:.4f}->{d2:.4f}")
    dt = time.perf_counter() - t0
    ok = ok and dt < 300.0
    _line(6, "spectral property",
          ok, f"delta1 > 0 and 10%-stable under doubling "
              f"({'; '.join(details)}), {dt:.1f}s (<300s)")


# ---------------------------------------------------------------------------
# 7. profile invariants
# ---------------------------------------------------------------------------

def test_criterion_07_profile_invariants():
    p, N = p_from_sigma(0.02, 1), 1
    gs = solve_ground_state(p, N)
    prof = build_profile(0.1, p, N, eta=0.1)
    inv = profile_invariants(prof, gs=gs)
    momentum_ok = inv["momentum"] == 0.0
    virial = inv["virial_moment"] / inv["virial_expected"]
    virial_ok = abs(virial - 1.0) <= 0.10
    # M(b) - M(0) = c0 b^2: quadratic fit over the small-b family
    bs = np.array([0.05, 0.075, 0.1, 0.125])
    excess = np.array([profile_invariants(
        build_profile(b, p, N, eta=0.1), gs=gs)["mass_excess"] for b in bs])
    c0 = float(np.polyfit(bs, excess, 2)[0])
    gamma_b = np.exp(-np.pi / 0.1)
    sc = sigma_c(p, N)
    energy_ok = (abs(inv["energy"]) < 0.1 ** 3
                 and abs(inv["energy"]) < 10.0 * (gamma_b + sc))
    ok = momentum_ok and virial_ok and c0 > 0 and energy_ok
    _line(7, "profile invariants",
          ok, f"momentum={inv['momentum']} (==0), virial ratio="
              f"{virial:.3f} (within 10%), c0={c0:.3f} (>0), "
              f"|E(Q_b)|={abs(inv['energy']):.2e} (<b^3={1e-3:.0e} and "
              f"<10(Gamma+sc)={10 * (gamma_b + sc):.2e})")


# ---------------------------------------------------------------------------
# 8. reduced-dynamics trapping
# ---------------------------------------------------------------------------

def test_criterion_08_reduced_trapping():
    t0 = time.perf_counter()
    sc = 1e-3
    bs = bstar(sc)
    ok = True
    details = []
    for mult in (0.8, 1.2):
        # b relaxes on the slow Gamma'(b*) timescale, so follow lambda deep
        # enough for the rate to settle before measuring convergence
        traj = integrate_reduced(sc, mult * bs, 1.0, lam_floor=1e-40)
        conv = abs(traj.b[-1] / bs - 1.0)
        ratio = selfsimilar_ratio(traj, b_star=bs)
        final = traj.lam <= 100.0 * traj.lam[-1]
        lo, hi = float(np.min(ratio[final])), float(np.max(ratio[final]))
        ok = ok and conv <= 0.02 and 0.98 <= lo and hi <= 1.02
        details.append(f"b0={mult}b*: |b/b*-1|={conv:.2e}, "
                       f"speed in [{lo:.4f},{hi:.4f}]")
    dt = time.perf_counter() - t0
    ok = ok and dt < 10.0
    _line(8, "reduced-dynamics trapping",
          ok, f"{'; '.join(details)}, {dt:.2f}s (<10s)")


# ---------------------------------------------------------------------------
# 9 & 10. flagship PDE run and concentration plateau
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def flagship():
    sc = 5e-3
    cfg = SimConfig(p=p_from_sigma(sc, 1), N=1, lam_floor=1e-3, s_max=40.0)
    t0 = time.perf_counter()
    trace, rep = run_selfsimilar(cfg)
    return sc, trace, rep, time.perf_counter() - t0


def test_criterion_09_flagship_run(flagship):
    sc, trace, rep, dt = flagship
    lam = np.array([r.lam for r in trace])
    decades = float(np.log10(np.max(lam) / lam[-1]))
    law = float(np.log(sc) / (-np.pi / rep.b_fit))
    ok = (3e-3 <= sc <= 1e-2
          and rep.status == "blowup"
          and decades >= 3.0
          and rep.corr >= 0.999
          and rep.band <= 0.10
          and 0.7 <= law <= 1.3
          and rep.eps_fraction < 0.3
          and dt < 1800.0)
    _line(9, "flagship PDE run",
          ok, f"sigma_c={sc} (in [3e-3,1e-2]), {decades:.2f} decades "
              f"(>=3), corr={rep.corr:.6f} (>=0.999), "
              f"b band={rep.band:.2e} (<=0.10), "
              f"log sigma_c/(-pi/b_fit)={law:.3f} (in [0.7,1.3]), "
              f"eps fraction={rep.eps_fraction:.3f} (<0.3), "
              f"{dt:.0f}s (<1800s)")


def test_criterion_10_concentration_plateau(flagship):
    sc, trace, rep, _ = flagship
    Rs, vals = concentration_scan(rep.ustar_r, rep.ustar_sq, sc, 1)
    variation = float(np.max(vals) / np.min(vals) - 1.0)
    ok = variation <= 0.50
    _line(10, "concentration plateau",
          ok, f"R^(-2sc) mass variation over one decade of R = "
              f"{variation:.3f} (<=0.50)")


# ---------------------------------------------------------------------------
# 11. conservation-law regression
# ---------------------------------------------------------------------------

def test_criterion_11_conservation_regression():
    coarse = run_conservation_control(t_end=0.5, dt=2e-3)
    fine = run_conservation_control(t_end=0.5, dt=1e-3)
    gain = coarse["energy_drift"] / fine["energy_drift"]
    # mass is conserved exactly by the linear substep (flux form), so it
    # sits at the roundoff floor for every dt: the per-unit-time bound is
    # the meaningful check and dt-halving cannot show an order there
    ok = (fine["mass_drift"] <= 1e-8
          and fine["energy_drift"] <= 1e-6
          and gain >= 3.0)
    _line(11, "conservation regression",
          ok, f"mass drift={fine['mass_drift']:.2e}/t (<=1e-8), "
              f"energy drift={fine['energy_drift']:.2e}/t (<=1e-6), "
              f"dt-halving gain={gain:.2f} (>=3, order 2)")
