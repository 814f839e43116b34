"""Reduced modulation ODE: b* fixed point, trapping, log-log limit."""

import numpy as np
import pytest

from nlsblowup.dynamics import (
    bstar,
    gamma_analytic,
    gamma_from_table,
    integrate_reduced,
    loglog_limit,
    selfsimilar_ratio,
)


def test_bstar_closed_form_exact():
    assert bstar(np.exp(-2.0 * np.pi)) == pytest.approx(0.5, rel=1e-14)
    assert bstar(0.01) == pytest.approx(np.pi / np.log(100.0), rel=1e-10)


def test_bstar_domain():
    for bad in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ValueError):
            bstar(bad)


def test_bstar_table_mode_matches_analytic():
    bs = np.linspace(0.2, 1.2, 40)
    gamma = gamma_from_table(bs, gamma_analytic(bs))
    for sc in (1e-4, 1e-3, 1e-2):
        assert bstar(sc, mode="gamma-table", gamma=gamma) == pytest.approx(
            bstar(sc), rel=1e-6)


def test_bstar_table_requires_bracket():
    gamma = gamma_from_table([0.4, 0.5], [gamma_analytic(0.4),
                                          gamma_analytic(0.5)])
    with pytest.raises(ValueError):
        bstar(0.5, mode="gamma-table", gamma=gamma, b_range=(0.4, 0.5))


def test_vector_field_unique_zero():
    sc = 0.05
    bs = bstar(sc)
    grid = np.linspace(0.1, 3.0, 500)
    f = sc - gamma_analytic(grid)
    signs = np.sign(f)
    crossings = np.count_nonzero(np.diff(signs))
    assert crossings == 1
    assert f[grid < bs - 0.01].min() > 0
    assert f[grid > bs + 0.01].max() < 0


def test_fixed_point_is_exactly_selfsimilar():
    sc = 0.05
    bs = bstar(sc)
    traj = integrate_reduced(sc, bs, horizon=60.0, lam_floor=1e-12)
    ratio = selfsimilar_ratio(traj)
    assert np.max(np.abs(ratio - 1.0)) < 1e-8
    assert np.max(np.abs(traj.b - bs)) < 1e-10


@pytest.mark.parametrize("factor", [0.8, 1.2])
def test_trapping(factor):
    sc = 0.05
    bs = bstar(sc)
    traj = integrate_reduced(sc, factor * bs, horizon=400.0, lam_floor=1e-12)
    assert traj.exit_side == "none"
    assert abs(traj.b[-1] / bs - 1.0) < 0.02
    ratio = selfsimilar_ratio(traj)
    final = traj.lam <= 100.0 * traj.lam[-1]
    assert np.all(ratio[final] > 0.98) and np.all(ratio[final] < 1.02)


def test_blowup_time_extrapolation_consistent():
    sc = 0.05
    traj = integrate_reduced(sc, bstar(sc), horizon=60.0)
    assert traj.T == pytest.approx(traj.time_to_blowup()[0], rel=1e-4)
    assert np.all(np.diff(traj.t) >= 0)


def test_reparametrization_band():
    sc = 0.05
    traj = integrate_reduced(sc, bstar(sc), horizon=8.0, max_step=0.02)
    lam, t, b = traj.lam, traj.t, traj.b
    val = -np.gradient(lam, t) * lam
    dev = np.abs(val[5:-5] / b[5:-5] - 1.0)
    assert np.max(dev) < 1e-3


def test_loglog_b_monotone_decreasing():
    traj, _ = loglog_limit(horizon=3000.0)
    assert np.all(np.diff(traj.b) < 0)
    assert traj.b[-1] > 0


def test_loglog_compensator_drift():
    traj, comp = loglog_limit(horizon=3000.0)
    rem = traj.time_to_blowup()
    window = rem <= 100.0 * rem[-1]
    drift = comp[window].max() / comp[window].min() - 1.0
    assert drift < 0.2


def test_no_fixed_point_at_critical():
    grid = np.linspace(0.05, 3.0, 200)
    assert np.all(-gamma_analytic(grid) < 0)


def test_exit_reports():
    high = integrate_reduced(0.5, 1.0, horizon=50.0, c_flux=0.0)
    assert high.exit_side == "high"
    low = integrate_reduced(0.0, 0.3, horizon=50.0, c_virial=0.0,
                            gamma=lambda b: 1.0)
    assert low.exit_side == "low"
