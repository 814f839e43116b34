"""Reduced modulation dynamics: b_s = c_v sigma_c - c_f Gamma(b), lam_s = -b lam.

The fixed point b* of sigma_c = Gamma(b) selects the self-similar rate;
trajectories trap at b* and produce lam(t) = sqrt(2 b* (T - t)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

__all__ = [
    "ReducedTrajectory",
    "gamma_analytic",
    "gamma_from_table",
    "bstar",
    "integrate_reduced",
    "selfsimilar_ratio",
    "loglog_limit",
]


def gamma_analytic(b):
    """Analytic surrogate of the radiation amplitude, e^{-pi/b}."""
    b = np.asarray(b, dtype=float)
    out = np.where(b > 0, np.exp(-np.pi / np.maximum(b, 1e-300)), 0.0)
    return float(out) if out.ndim == 0 else out


def gamma_from_table(b_values, gamma_values):
    """Interpolant of log Gamma as a linear function of 1/b."""
    b_values = np.asarray(b_values, dtype=float)
    gamma_values = np.asarray(gamma_values, dtype=float)
    if np.any(gamma_values <= 0):
        raise ValueError("Gamma table entries must be positive")
    order = np.argsort(1.0 / b_values)
    x = (1.0 / b_values)[order]
    y = np.log(gamma_values)[order]

    def gamma(b):
        return float(np.exp(np.interp(1.0 / b, x, y)))

    return gamma


def bstar(sigma_c, mode="closed-form", gamma=None, b_range=(1e-3, 5.0)):
    """Rate fixed point: solves sigma_c = Gamma(b).

    closed-form mode inverts the analytic surrogate, b* = pi/log(1/sigma_c);
    gamma-table mode bisects sigma_c = Gamma(b) for a supplied interpolant.
    """
    if not 0.0 < sigma_c < 1.0:
        raise ValueError("sigma_c must lie in (0, 1)")
    if mode == "closed-form":
        return np.pi / np.log(1.0 / sigma_c)
    if mode == "gamma-table":
        if gamma is None:
            raise ValueError("gamma-table mode needs a Gamma interpolant")
        lo, hi = b_range
        flo, fhi = gamma(lo) - sigma_c, gamma(hi) - sigma_c
        if flo * fhi > 0:
            raise ValueError("Gamma table does not bracket sigma_c")
        return brentq(lambda b: gamma(b) - sigma_c, lo, hi, xtol=1e-10)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class ReducedTrajectory:
    """Integrated reduced system sampled on the solver's grid."""

    sigma_c: float
    c_virial: float
    c_flux: float
    s: np.ndarray
    b: np.ndarray
    lam: np.ndarray
    t: np.ndarray
    T: float  # extrapolated blow-up time
    exit_side: str = "none"  # trapping failure report

    def time_to_blowup(self):
        """T - t without cancellation: backward-accumulated integral of lam^2.

        Each segment integrates exp(2 log lam) with log lam linear in s,
        which is exact in the trapped regime and avoids the catastrophic
        loss of precision of T - t once lam^2 drops below eps * T.
        """
        y = np.log(self.lam)
        ds = np.diff(self.s)
        dy = np.diff(y)
        lam2 = self.lam ** 2
        # int exp(2y) ds over a segment with linear y
        seg = np.where(np.abs(dy) > 1e-12,
                       ds * (lam2[1:] - lam2[:-1]) /
                       np.where(dy == 0, 1.0, 2.0 * dy),
                       0.5 * ds * (lam2[1:] + lam2[:-1]))
        tail = lam2[-1] / (2.0 * self.b[-1])  # from lam lam_t = -b
        back = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        return back + tail


def integrate_reduced(sigma_c, b0, lam0=1.0, horizon=400.0, lam_floor=1e-12,
                      gamma=None, c_virial=1.0, c_flux=1.0, b_max=5.0,
                      rtol=1e-10, max_step=1.0):
    """Integrate b_s = c_v sigma_c - c_f Gamma(b), lam_s = -b lam, t_s = lam^2.

    log(lam) is the integration variable so arbitrarily deep collapse stays
    well-scaled.  Stops at lam_floor; T is extrapolated from a linear fit of
    lam^2 against t over the final samples.
    """
    if lam0 <= 0:
        raise ValueError("lam0 must be positive")
    if gamma is None:
        gamma = gamma_analytic

    def rhs(s, y):
        b, loglam, t = y
        return [c_virial * sigma_c - c_flux * gamma(b),
                -b,
                np.exp(2.0 * loglam)]

    def hit_floor(s, y):
        return y[1] - np.log(lam_floor)
    hit_floor.terminal = True
    hit_floor.direction = -1

    def exit_low(s, y):
        return y[0]
    exit_low.terminal = True

    def exit_high(s, y):
        return y[0] - b_max
    exit_high.terminal = True

    sol = solve_ivp(rhs, (0.0, horizon), [b0, np.log(lam0), 0.0],
                    events=(hit_floor, exit_low, exit_high),
                    rtol=rtol, atol=1e-12, max_step=max_step,
                    dense_output=False)
    b = sol.y[0]
    lam = np.exp(sol.y[1])
    t = sol.y[2]
    exit_side = "none"
    if sol.t_events[1].size:
        exit_side = "low"
    elif sol.t_events[2].size:
        exit_side = "high"

    # extrapolated blow-up time from the self-similar tail lam^2 = 2b(T - t),
    # fitted where t still resolves increments in double precision
    valid = np.where(lam ** 2 >= 1e-12 * max(t[-1], lam[0] ** 2))[0]
    k = max(2, len(valid) // 4)
    idx = valid[-k:]
    slope, intercept = np.polyfit(t[idx], lam[idx] ** 2, 1)
    T = -intercept / slope if slope < 0 else t[-1] + lam[-1] ** 2 / (
        2.0 * max(b[-1], 1e-12))
    return ReducedTrajectory(sigma_c=sigma_c, c_virial=c_virial,
                             c_flux=c_flux, s=sol.t, b=b, lam=lam, t=t, T=T,
                             exit_side=exit_side)


def selfsimilar_ratio(traj, b_star=None):
    """lam / sqrt(2 b* (T - t)) along the trajectory (cancellation-safe)."""
    if b_star is None:
        b_star = bstar(traj.sigma_c)
    remaining = traj.time_to_blowup()
    return traj.lam / np.sqrt(2.0 * b_star * remaining)


def loglog_limit(b0=0.5, lam0=1.0, horizon=2000.0, lam_floor=1e-10,
                 rtol=1e-10):
    """Critical case sigma_c = 0: b_s = -e^{-pi/b}, the log-log branch.

    Returns the trajectory and the compensated rate
    lam * sqrt(log|log(T-t)| / (T-t)), which should drift slowly.
    """
    traj = integrate_reduced(0.0, b0, lam0=lam0, horizon=horizon,
                             lam_floor=lam_floor, c_virial=0.0, rtol=rtol)
    remaining = traj.time_to_blowup()
    loglog = np.log(np.maximum(np.abs(np.log(remaining)), 1.0 + 1e-12))
    comp = traj.lam * np.sqrt(loglog / remaining)
    return traj, comp
