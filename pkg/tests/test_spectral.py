"""Linearized operators, eigenpairs, and the constrained coercivity check."""

import numpy as np
import pytest

from nlsblowup.grid import RadialGrid
from nlsblowup.groundstate import solve_ground_state, critical_exponent
from nlsblowup.spectral import (
    LinearizedOperator, make_operator, lowest_eigenpair,
    verify_spectral_property, constrained_minimum, _sector_forms,
    virial_form_Hp, form_Htilde,
)


@pytest.fixture(scope="module")
def gs13():
    return solve_ground_state(3.0, 1, r_max=20.0, n=4001)


@pytest.fixture(scope="module")
def gs23():
    return solve_ground_state(3.0, 2, r_max=20.0, n=4001)


def test_operator_symmetry(gs23):
    op = make_operator(gs23, "Lplus")
    g = gs23.grid
    rng = np.random.default_rng(3)
    f, h = rng.standard_normal(g.n), rng.standard_normal(g.n)
    # exact under the cell-volume pairing (flux-form discretization) ...
    lhs = np.sum(g.cellvol * h * op.apply(f))
    rhs = np.sum(g.cellvol * f * op.apply(h))
    assert lhs == pytest.approx(rhs, rel=1e-12)
    # ... and to discretization accuracy under the quadrature pairing
    f = np.exp(-g.r ** 2)
    h = g.r ** 2 * np.exp(-g.r ** 2 / 2)
    assert g.dot(op.apply(f), h) == pytest.approx(g.dot(f, op.apply(h)), rel=1e-4)


def test_lminus_kernel_eigenpair(gs13):
    lam, xi = lowest_eigenpair(make_operator(gs13, "Lminus"))
    assert abs(lam) < 1e-9
    qn = gs13.Q / np.sqrt(gs13.grid.mass(gs13.Q))
    assert np.max(np.abs(xi - qn)) < 1e-8


def test_lplus_ell1_kernel(gs23):
    # Ker(L_+) = span(grad Q): the ell=1 sector has a zero mode
    lam, _ = lowest_eigenpair(make_operator(gs23, "Lplus", ell=1), shift=-0.5)
    assert lam < 1e-6  # lowest is <= 0 with the zero mode present


def test_lplus_has_negative_direction(gs13):
    lam, _ = lowest_eigenpair(make_operator(gs13, "Lplus"))
    assert lam < -0.1


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5])
def test_spectral_property_positive(N):
    delta1, rows = verify_spectral_property(N)
    assert delta1 > 0
    assert len(rows) == 8
    # unconstrained high-ell sector minima increase with ell
    for part in ("eps1", "eps2"):
        vals = [r["minimum"] for r in rows if r["part"] == part and r["sector"] >= 2]
        assert vals == sorted(vals)


def test_constraints_are_necessary():
    # without projection the ell=0 eps2 form has a nonpositive direction
    gs = solve_ground_state(critical_exponent(2), 2, r_max=30.0, n=1200)
    g = gs.grid
    interior = np.ones(g.n, dtype=bool)
    interior[-1] = False
    A, B = _sector_forms(gs, "eps2", 0)
    mu = constrained_minimum(A, B, [], g, interior)
    assert mu <= 1e-8


def test_virial_form_basics(gs13):
    g = gs13.grid
    assert virial_form_Hp(np.zeros(g.n, dtype=complex), gs13) == 0.0
    eps = np.exp(-g.r ** 2) * (1 + 0.3j)
    a = virial_form_Hp(eps, gs13)
    # bilinearity: quadratic scaling
    assert virial_form_Hp(2 * eps, gs13) == pytest.approx(4 * a, rel=1e-12)


def test_virial_form_swap_under_i(gs13):
    # multiplying by i swaps which potential weights which part
    g, p = gs13.grid, gs13.p
    e1 = np.exp(-g.r ** 2)
    e2 = g.r ** 2 * np.exp(-g.r ** 2)
    eps = e1 + 1j * e2
    w = g.r * g.derivative(gs13.Q, even=True) * gs13.Q ** (p - 2)
    diff = virial_form_Hp(eps, gs13) - virial_form_Hp(1j * eps, gs13)
    expected = (p * (p - 1) / 2 - (p - 1) / 2) * g.integrate(w * (e1 ** 2 - e2 ** 2))
    assert diff == pytest.approx(expected, rel=1e-10)


def test_hp_approaches_critical_form():
    # p -> p_c: the H_p value converges to the critical-exponent form
    # (without its rank-one correction) evaluated on the same probe
    N = 2
    gs_c = solve_ground_state(critical_exponent(N), N, r_max=20.0, n=4001)
    g = gs_c.grid
    eps = np.exp(-g.r ** 2) * (1 + 1j)
    d_q = g.scale_generators(gs_c.Q, gs_c.p)[1]
    d2_q = g.scale_generators(d_q, gs_c.p)[0]
    from nlsblowup.spectral import make_operator
    lpD2 = make_operator(gs_c, "Lplus").apply(d2_q)
    rank_one = g.dot(np.real(eps), lpD2) * g.dot(np.real(eps), d_q) / g.mass(d_q)
    base = form_Htilde(eps, gs_c) + rank_one
    vals = []
    for sc in (0.02, 0.005):
        p = 1.0 + 2.0 / (N / 2.0 - sc)
        gs = solve_ground_state(p, N, r_max=20.0, n=4001)
        vals.append(abs(virial_form_Hp(eps, gs) - base))
    assert vals[1] < 0.5 * vals[0]


def test_htilde_coercive_on_constrained_samples(gs23):
    # project random fields onto the orthogonality constraints; the
    # corrected critical form stays bounded below by a positive multiple
    # of the comparison norm
    gs = solve_ground_state(critical_exponent(2), 2, r_max=20.0, n=2001)
    g = gs.grid
    lam_q, d_q = g.scale_generators(gs.Q, gs.p)
    d2_q, _ = g.scale_generators(d_q, gs.p)
    cons1 = [gs.Q, g.r ** 2 * gs.Q]
    cons2 = [d_q, d2_q]
    rng = np.random.default_rng(21)
    for _ in range(8):
        e1 = rng.standard_normal(4) @ np.array(
            [np.exp(-g.r ** 2 / s) for s in (0.5, 1.0, 2.0, 4.0)])
        e2 = rng.standard_normal(4) @ np.array(
            [g.r ** 2 * np.exp(-g.r ** 2 / s) for s in (0.5, 1.0, 2.0, 4.0)])
        for c in cons1:
            e1 = e1 - c * g.dot(e1, c) / g.mass(c)
        for c in cons2:
            e2 = e2 - c * g.dot(e2, c) / g.mass(c)
        eps = e1 + 1j * e2
        comparison = g.grad_sq(e1) + g.grad_sq(e2) \
            + g.integrate(np.exp(-g.r) * (e1 ** 2 + e2 ** 2))
        assert form_Htilde(eps, gs) > 0.01 * comparison


def test_centrifugal_term_positive():
    g = RadialGrid.uniform(3, 10.0, 501)
    op = LinearizedOperator("grad", g, np.ones(g.n), ell=2)
    f = g.r ** 2 * np.exp(-g.r)
    assert g.dot(op.apply(f), f) > 0
