"""Linearized operators, eigenpairs, and the constrained spectral property.

Everything is assembled on a RadialGrid in flux form, so the discrete
operators are exactly symmetric under the cell-volume inner product.  The
spectral-property check projects onto the orthogonal complement of the
constraint span and solves a dense generalized eigenproblem per
spherical-harmonic sector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, null_space

from .grid import RadialGrid, tridiag_matvec, tridiag_solve, tridiag_dense
from .groundstate import (GroundState, critical_exponent,
                          solve_ground_state, SolverFailure)


@dataclass
class LinearizedOperator:
    """Schroedinger-type radial operator -Lap + V + centrifugal, sector ell."""

    kind: str
    grid: RadialGrid
    potential: np.ndarray
    ell: int = 0
    bands: tuple = field(init=False, repr=False)

    def __post_init__(self):
        g = self.grid
        if not np.all(np.isfinite(self.potential)):
            raise ValueError("operator potential contains non-finite values")
        lo, di, up = g.laplacian_bands(outer="dirichlet")
        pot = self.potential.copy()
        if self.ell:
            cf = np.zeros(g.n)
            cf[1:] = self.ell * (self.ell + g.N - 2) / g.r[1:] ** 2
            pot = pot + cf
        self.bands = (-lo, -di + pot, -up)

    def apply(self, f):
        return tridiag_matvec(self.bands, f)

    def dense(self):
        return tridiag_dense(self.bands)

    def pairing_matrix(self):
        """Dense symmetric matrix of the form (u, Op v) in the volume pairing."""
        A = self.grid.cellvol[:, None] * self.dense()
        return 0.5 * (A + A.T)


def _weighted_gradient(gs, exponent):
    """Q^exponent * r Q', evaluated safely where Q underflows (the product
    decays like Q^{1+exponent}, so it vanishes with Q for exponent > -1)."""
    g = gs.grid
    rqp = g.r * g.derivative(gs.Q, even=True)
    out = np.zeros(g.n)
    mask = np.abs(gs.Q) > 1e-120
    out[mask] = np.abs(gs.Q[mask]) ** exponent * rqp[mask]
    return out


def make_operator(gs, kind, b=0.0, phi_b=None, P=None, ell=0):
    """Assemble one of the named linearized operators about gs.

    Lplus/Lminus: about the ground state (optionally the b-profile variants
    with phi_b and P supplied).  curlyL1/curlyL2: the critical-exponent
    virial potentials (2/N)(4/N+1) Q^{4/N-1} r Q' and (2/N) Q^{4/N-1} r Q'.
    """
    g, p, N = gs.grid, gs.p, gs.N
    base = P if P is not None else gs.Q
    if kind in ("Lplus", "Lplus_b"):
        V = 1.0 - p * np.abs(base) ** (p - 1)
    elif kind in ("Lminus", "Lminus_b"):
        V = 1.0 - np.abs(base) ** (p - 1)
    elif kind in ("curlyL1", "curlyL2"):
        fac = (2.0 / N) * ((4.0 / N + 1.0) if kind == "curlyL1" else 1.0)
        V = fac * _weighted_gradient(gs, 4.0 / N - 1.0)
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    if kind.endswith("_b"):
        if phi_b is None:
            raise ValueError("b-variant operators need the cutoff phi_b")
        V = V - (b ** 2 / 4.0) * phi_b * g.r ** 2
    return LinearizedOperator(kind, g, V, ell=ell)


def lowest_eigenpair(op, shift=None, tol=1e-8, max_iter=200):
    """Lowest eigenvalue and (volume-normalized) eigenvector by shifted
    inverse iteration, with a Rayleigh-quotient update once locked in."""
    g = op.grid
    rng = np.random.default_rng(12)
    x = np.exp(-g.r) + 1e-3 * rng.standard_normal(g.n)
    if op.ell:
        x *= g.r ** min(op.ell, 2)
    x /= np.sqrt(g.mass(x))
    if shift is None:
        shift = float(np.min(op.bands[1] - np.abs(op.bands[0]) - np.abs(op.bands[2])))
    lam = None
    history = []
    for it in range(max_iter):
        lo, di, up = op.bands
        try:
            y = tridiag_solve((lo, di - shift, up), x)
        except np.linalg.LinAlgError:
            shift -= 1e-8
            continue
        y /= np.sqrt(g.mass(y))
        lam_new = g.dot(y, op.apply(y))
        history.append(lam_new)
        res = np.sqrt(g.mass(op.apply(y) - lam_new * y))
        x = y
        if res < tol:
            lam = lam_new
            break
        if it > 3:
            shift = lam_new  # Rayleigh iteration: cubic convergence
    else:
        raise SolverFailure(f"inverse iteration stalled; Ritz history {history[-6:]}")
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    if x[0] < 0 and op.ell == 0:
        x = -x
    return lam, x


# -- spectral property ----------------------------------------------------


def _sector_forms(gs, which, ell):
    """(A, B) dense symmetric pairing matrices: A the virial operator form,
    B the comparison form grad^2 + exp(-r) weighted mass, both in sector ell."""
    g = gs.grid
    op = make_operator(gs, "curlyL1" if which == "eps1" else "curlyL2", ell=ell)
    A = op.pairing_matrix()
    gradop = LinearizedOperator("grad", g, np.exp(-g.r), ell=ell)
    B = gradop.pairing_matrix()
    return A, B


def _sector_constraints(gs, which, ell):
    g, p = gs.grid, gs.p
    lam_q, d_q = g.scale_generators(gs.Q, p)
    if ell == 0:
        if which == "eps1":
            return [gs.Q, lam_q]
        lam2_q, _ = g.scale_generators(lam_q, p)
        return [lam_q, lam2_q]
    if ell == 1:
        if which == "eps1":
            return [g.r * gs.Q]
        return [g.derivative(gs.Q, even=True)]
    return []


def constrained_minimum(A, B, constraints, grid, interior):
    """Smallest generalized eigenvalue of A x = mu B x restricted to the
    orthogonal complement of the constraint functionals."""
    idx = np.flatnonzero(interior)
    A = A[np.ix_(idx, idx)]
    B = B[np.ix_(idx, idx)]
    if constraints:
        C = np.array([(grid.cellvol * c)[idx] for c in constraints])
        gram = C @ C.T
        cond = np.linalg.cond(gram)
        if cond > 1e12:
            raise SolverFailure(f"constraint Gram matrix ill-conditioned ({cond:.1e})")
        Z = null_space(C)
        A = Z.T @ A @ Z
        B = Z.T @ B @ Z
    vals = eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])
    return float(vals[0])


def verify_spectral_property(N, r_max=30.0, n=1200, sectors=(0, 1, 2, 3)):
    """Minimize the virial Rayleigh quotients per sector at the critical
    exponent; returns (delta1, report rows)."""
    p = critical_exponent(N)
    gs = solve_ground_state(p, N, r_max=r_max, n=n)
    g = gs.grid
    interior = np.ones(g.n, dtype=bool)
    interior[-1] = False
    rows = []
    for ell in sectors:
        interior_l = interior.copy()
        if ell > 0:
            interior_l[0] = False  # fields vanish at the origin
        for which in ("eps1", "eps2"):
            A, B = _sector_forms(gs, which, ell)
            cons = _sector_constraints(gs, which, ell)
            mu = constrained_minimum(A, B, cons, g, interior_l)
            rows.append({"sector": ell, "part": which, "minimum": mu,
                         "n_constraints": len(cons)})
    delta1 = min(row["minimum"] for row in rows)
    # centrifugal monotonicity beyond the computed sectors
    by_part = {}
    for row in rows:
        by_part.setdefault(row["part"], []).append((row["sector"], row["minimum"]))
    return delta1, rows


def virial_form_Hp(eps, gs):
    """Quadratic virial form: |grad eps|^2 plus the p-dependent potentials
    weighting the real and imaginary parts separately."""
    g, p = gs.grid, gs.p
    e1, e2 = np.real(eps), np.imag(eps)
    w = _weighted_gradient(gs, p - 2.0)
    out = g.grad_sq(e1) + g.grad_sq(e2)
    out += (p * (p - 1) / 2.0) * g.integrate(w * e1 ** 2)
    out += ((p - 1) / 2.0) * g.integrate(w * e2 ** 2)
    return float(out)


def form_Htilde(eps, gs, lplus_D2Q=None):
    """Critical-exponent quadratic form with the rank-one correction
    -(e1, L_+ D^2 Q)(e1, DQ)/|DQ|^2."""
    g, p = gs.grid, gs.p
    e1, e2 = np.real(eps), np.imag(eps)
    N = gs.N
    w = (2.0 / N) * _weighted_gradient(gs, 4.0 / N - 1.0)
    out = g.grad_sq(e1) + g.grad_sq(e2)
    out += (1.0 + 4.0 / N) * g.integrate(w * e1 ** 2)
    out += g.integrate(w * e2 ** 2)
    _, d_q = g.scale_generators(gs.Q, p)
    if lplus_D2Q is None:
        _, d2_q = g.scale_generators(d_q, p)
        lplus_D2Q = make_operator(gs, "Lplus").apply(d2_q)
    out -= g.dot(e1, lplus_D2Q) * g.dot(e1, d_q) / g.mass(d_q)
    return float(out)
