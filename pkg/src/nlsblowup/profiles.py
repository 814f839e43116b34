"""Approximate self-similar blow-up profiles.

The zeroth-order profile P0 solves the elliptic problem with the parabolic
trap (b^2 r^2 / 4) on [0, R_b] with a Dirichlet wall at R_b (strictly
before the turning point 2/|b|), found by shooting on P(0) near Q(0) and
polished on the discrete system.  A smooth cutoff localizes it, the
first-order correction (T_b, mu_b) removes the O(sigma) forcing, and the
full profile is Q_b = (P~0 + sigma T_b) e^{-i b r^2/4}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .grid import RadialGrid, RadialField, tridiag_matvec, tridiag_solve
from .groundstate import (GroundState, SolverFailure, sigma_c as sigma_of,
                          solve_ground_state, _newton_polish, shoot_q0)
from .spectral import LinearizedOperator, lowest_eigenpair


@dataclass
class SelfSimilarProfile:
    b: float
    p: float
    N: int
    eta: float
    sigma: float
    grid: RadialGrid
    R_b: float
    R_b_minus: float
    P0: np.ndarray
    phi: np.ndarray
    T_b: np.ndarray = None
    mu_b: float = None
    lam_b: float = None
    xi_b: np.ndarray = None
    P0_head: float = None

    @property
    def P0_tilde(self):
        return self.phi * self.P0

    @property
    def P_b(self):
        P = self.P0_tilde.astype(complex)
        if self.T_b is not None and self.sigma:
            P = P + self.sigma * self.T_b
        return P

    @property
    def Q_b(self):
        return self.P_b * np.exp(-1j * self.b * self.grid.r ** 2 / 4.0)


def turning_radii(b, eta):
    """(R_b, R_b^-): the Dirichlet wall and the start of the cutoff band."""
    R_b = (2.0 / abs(b)) * np.sqrt(1.0 - eta)
    return R_b, np.sqrt(1.0 - eta) * R_b


def _p0_rhs(p, N, b):
    def fun(r, y):
        q, dq = y
        lap1 = (N - 1) / r * dq if r > 0 else 0.0
        return [dq, -lap1 + q - (b * b * r * r / 4.0) * q
                - np.sign(q) * np.abs(q) ** p]
    return fun


def _classify_P0(p, N, b, a, R_b):
    """Integrate the profile equation from the origin up to R_b.

    Returns (+1, sol) if P crosses zero before R_b (P(0) too large),
    (-1, sol) if P turns back upward while still positive (too small),
    (0, sol) if P decays all the way to the wall (knife edge)."""
    fun = _p0_rhs(p, N, b)
    cross = lambda r, y: y[0]
    cross.terminal = True
    cross.direction = -1.0

    def regrow(r, y):
        return y[1] if 1e-10 * a < y[0] < 0.5 * a else -1.0
    regrow.terminal = True
    regrow.direction = 1.0

    sol = solve_ivp(fun, (1e-8, R_b), [a, 0.0], rtol=1e-12, atol=1e-14,
                    events=[cross, regrow], dense_output=True)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


def solve_P0_head(b, p, N, eta, rtol=1e-13):
    """Shooting value P(0): the separatrix between early zero crossing and
    positive regrowth, which decays monotonically out to the wall at R_b."""
    R_b, _ = turning_radii(b, eta)
    q0 = shoot_q0(p, N)
    lo = hi = None
    for da in np.concatenate([[0.0], np.geomspace(1e-6, 0.3, 16)]):
        for a in (q0 * (1.0 + da), q0 * (1.0 - da)):
            c, _ = _classify_P0(p, N, b, a, R_b)
            if c > 0 and (hi is None or a < hi):
                hi = a
            # no-event runs (P still positive at the wall) also sit below
            # the separatrix: they bound the shooting value from below
            if c <= 0 and (lo is None or a > lo):
                lo = a
        if lo is not None and hi is not None and lo < hi:
            break
    if lo is None or hi is None or lo >= hi:
        raise SolverFailure(
            f"no shooting window near Q(0) for b={b}, eta={eta}: "
            "b too large for this eta")
    while (hi - lo) > rtol * hi:
        mid = 0.5 * (lo + hi)
        c, _ = _classify_P0(p, N, b, mid, R_b)
        if c > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def solve_P0(b, p, N, eta, grid, head=None):
    """P0 sampled on grid (R_b must sit on a node up to roundoff), solved to
    discrete-system accuracy; zero beyond R_b."""
    R_b, _ = turning_radii(b, eta)
    if head is None:
        head = solve_P0_head(b, p, N, eta)
    _, sol = _classify_P0(p, N, b, head, R_b)
    r = grid.r
    rr = np.clip(r, 1e-8, sol.t[-1])
    P = sol.sol(rr)[0]
    P[0] = head
    P = np.where(r <= sol.t[-1], P, 0.0)
    P = np.maximum(P, 0.0)
    P = np.where(r > R_b * (1 + 1e-12), 0.0, P)
    V_extra = (b * b / 4.0) * r ** 2
    P = _newton_polish(grid, p, V_extra, P, r_support=R_b)
    if np.any(P[r < R_b * (1 - 1e-12)] <= 0):
        raise SolverFailure(f"P0 lost positivity inside R_b (b={b}, eta={eta})")
    return P


def build_cutoff(grid, b, eta):
    """Quintic smoothstep from 1 on [0, R_b^-] to 0 on [R_b, infty)."""
    R_b, R_bm = turning_radii(b, eta)
    band = (grid.r > R_bm) & (grid.r < R_b)
    if np.count_nonzero(band) < 16:
        raise ValueError(
            f"cutoff band [{R_bm:.2f}, {R_b:.2f}] resolved by fewer than "
            "16 nodes; refine the grid")
    s = np.clip((grid.r - R_bm) / (R_b - R_bm), 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def error_psi0(prof):
    """Localization error Psi0 = Psi~0 e^{i b r^2/4} supported in the
    cutoff band; Psi~0 = -(2 phi' P0' + P0 lap(phi) + (phi^p - phi) P0^p)."""
    g, p = prof.grid, prof.p
    dphi = g.derivative(prof.phi, even=True)
    dP = g.derivative(prof.P0, even=True)
    lap_phi = g.laplacian(prof.phi)
    band = (g.r > prof.R_b_minus) & (g.r < prof.R_b)
    psi_t = -(2.0 * dphi * dP + prof.P0 * lap_phi
              + (prof.phi ** p - prof.phi) * np.abs(prof.P0) ** p)
    psi_t = np.where(band, psi_t, 0.0)
    return psi_t * np.exp(1j * prof.b * g.r ** 2 / 4.0)


def _profile_operator(prof, kind):
    """(L_+)_b or (L_-)_b about P~0 with the cutoff parabolic term."""
    g, p = prof.grid, prof.p
    P = prof.P0_tilde
    fac = p if kind == "Lplus_b" else 1.0
    V = 1.0 - (prof.b ** 2 / 4.0) * prof.phi * g.r ** 2 \
        - fac * np.abs(P) ** (p - 1)
    return LinearizedOperator(kind, g, V)


def dP0tilde_db(prof, rel_step=1e-3):
    """Centered finite difference of P~0 in b on the profile's own grid."""
    db = rel_step * abs(prof.b)
    out = []
    for bb in (prof.b + db, prof.b - db):
        R_b, R_bm = turning_radii(bb, prof.eta)
        if R_b > prof.grid.r[-1]:
            raise ValueError("grid does not cover R_b at the decreased b")
        P = solve_P0(bb, prof.p, prof.N, prof.eta, prof.grid)
        s = np.clip((prof.grid.r - R_bm) / (R_b - R_bm), 0.0, 1.0)
        phi = 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)
        out.append(phi * P)
    return (out[0] - out[1]) / (2.0 * db)


def solve_correction(prof, dP0_db=None):
    """First-order profile correction: mu_b from the solvability ratio and
    T_b from the two linear solves; updates prof in place and returns
    (T_b, mu_b)."""
    g, p, b = prof.grid, prof.p, prof.b
    if dP0_db is None:
        dP0_db = dP0tilde_db(prof)
    P = prof.P0_tilde

    lminus = _profile_operator(prof, "Lminus_b")
    lam_b, xi = lowest_eigenpair(lminus)
    denom = g.dot(dP0_db, xi)
    if abs(denom) < 1e-10:
        raise SolverFailure("degenerate profile: (dP0/db, xi_b) ~ 0")
    mu_b = b * g.dot(P, xi) / denom

    # real part: (L_+)_b Re T = (mu_b/4) r^2 P~0
    lplus = _profile_operator(prof, "Lplus_b")
    rhs_re = (mu_b / 4.0) * g.r ** 2 * P
    T_re = tridiag_solve(lplus.bands, rhs_re)
    T_re = T_re + tridiag_solve(lplus.bands, rhs_re - lplus.apply(T_re))
    res_re = np.linalg.norm(lplus.apply(T_re) - rhs_re) / np.linalg.norm(rhs_re)

    # imaginary part: (L_-)_b Im T = mu_b dP0/db - b P~0.  P~0 is itself a
    # discrete kernel element of (L_-)_b (lam_b ~ 0), so the solve is
    # deflated: project right side and iterates off xi_b and refine.
    rhs_im = mu_b * dP0_db - b * P
    cv = g.cellvol
    xi_cv = xi / np.sqrt(np.sum(cv * xi ** 2))
    proj = lambda f: f - xi_cv * np.sum(cv * f * xi_cv)
    rhs_im = proj(rhs_im)
    T_im = np.zeros(g.n)
    for _ in range(3):
        T_im = T_im + proj(tridiag_solve(
            lminus.bands, proj(rhs_im - lminus.apply(T_im))))
    res_im = np.linalg.norm(lminus.apply(T_im) - rhs_im) / np.linalg.norm(rhs_im)
    if max(res_re, res_im) > 1e-8:
        raise SolverFailure(
            f"correction solves not converged (residuals {res_re:.1e}, {res_im:.1e})")

    prof.T_b = T_re + 1j * T_im
    prof.mu_b = mu_b
    prof.lam_b = lam_b
    prof.xi_b = xi
    return prof.T_b, mu_b


def build_profile(b, p, N, eta=0.1, h=2e-3, pad=12.0, sigma=None,
                  with_correction=True):
    """Assemble the full profile record at one b."""
    if not (0 < eta < 0.5):
        raise ValueError(f"eta={eta} outside (0, 0.5)")
    if b == 0:
        raise ValueError("b=0: the profile is the ground state; use groundstate")
    if sigma is None:
        sigma = sigma_of(p, N)
    R_b, R_bm = turning_radii(b, eta)
    m = int(round(R_b / h))
    hh = R_b / m
    n = m + int(round(pad / hh)) + 1
    grid = RadialGrid.uniform(N, hh * (n - 1), n)
    head = solve_P0_head(b, p, N, eta)
    P0 = solve_P0(b, p, N, eta, grid, head=head)
    phi = build_cutoff(grid, b, eta)
    prof = SelfSimilarProfile(
        b=b, p=p, N=N, eta=eta, sigma=sigma, grid=grid,
        R_b=R_b, R_b_minus=R_bm, P0=P0, phi=phi, P0_head=head)
    if with_correction:
        solve_correction(prof)
    return prof


def mu_limit(gs):
    """b -> 0 limit of mu_b: 4|Q|^2 / ((1+sigma_c)|yQ|^2).

    Equivalent to |Q|^2 / (2(rho, Q)) via the rho pairing identity.
    """
    return 4.0 * gs.mass / ((1.0 + gs.sigma_c) * gs.ymass)


def _profile_at(prof, bb, with_correction):
    """Sibling profile at a perturbed b on the same grid (for differencing)."""
    R_b, R_bm = turning_radii(bb, prof.eta)
    pr = SelfSimilarProfile(
        b=bb, p=prof.p, N=prof.N, eta=prof.eta, sigma=prof.sigma,
        grid=prof.grid, R_b=R_b, R_b_minus=R_bm,
        P0=solve_P0(bb, prof.p, prof.N, prof.eta, prof.grid),
        phi=build_cutoff(prof.grid, bb, prof.eta))
    if with_correction:
        solve_correction(pr)
    return pr


def dQb_db(prof, rel_step=1e-3):
    """Centered finite difference of the full profile Q_b in b."""
    db = rel_step * abs(prof.b)
    qp = _profile_at(prof, prof.b + db, prof.T_b is not None).Q_b
    qm = _profile_at(prof, prof.b - db, prof.T_b is not None).Q_b
    return (qp - qm) / (2.0 * db)


def full_error_psi(prof, dQ_db=None):
    """Psi_b = -i sig mu dQ_b/db - lap Q_b + Q_b - i b Lam Q_b - Q_b|Q_b|^{p-1},
    with dQ_b/db by centered differences of complete profiles."""
    g, p, b, sig = prof.grid, prof.p, prof.b, prof.sigma
    if dQ_db is None:
        dQ_db = dQb_db(prof)
    Qb = prof.Q_b
    lam_qb = (2.0 / (p - 1.0)) * Qb + g.r * g.derivative(Qb, even=True)
    lap = g.laplacian(Qb)
    return (-1j * sig * prof.mu_b * dQ_db - lap + Qb - 1j * b * lam_qb
            - Qb * np.abs(Qb) ** (p - 1))


def profile_invariants(prof, gs=None):
    """Report of the conserved-quantity degeneracies of Q_b."""
    g, p, b, sig = prof.grid, prof.p, prof.b, prof.sigma
    if gs is None:
        gs = solve_ground_state(p, prof.N, r_max=min(25.0, g.r[-1]),
                                n=int(round(min(25.0, g.r[-1]) / 2e-3)) + 1)
    Qb = prof.Q_b
    E_qb = g.energy(Qb, p)
    # Cartesian momentum Im int d_j u conj(u) dx of a radial field is the
    # radial current times the angular first moment of the sphere, which
    # vanishes identically; any parity-symmetric quadrature returns 0.
    report = {
        "momentum": 0.0,
        "radial_current": g.momentum(Qb),
        "virial_moment": g.virial_moment(Qb),
        "virial_expected": -(b / 2.0) * gs.ymass,
        "mass_excess": g.mass(prof.P0_tilde) - gs.mass,
        "energy": E_qb,
        "mass": g.mass(Qb),
    }
    if prof.T_b is not None and prof.mu_b is not None:
        dQ_db = dQb_db(prof)
        psi = full_error_psi(prof, dQ_db=dQ_db)
        lam_qb = (2.0 / (p - 1.0)) * Qb + g.r * g.derivative(Qb, even=True)
        lhs = 2.0 * E_qb - g.pairing(lam_qb, psi + 1j * sig * prof.mu_b * dQ_db)
        rhs = sig * (2.0 * E_qb + g.mass(Qb))
        report["pohozaev_lhs"] = lhs
        report["pohozaev_rhs"] = rhs
        report["psi_sup"] = float(np.max(np.abs(psi)))
    return report
