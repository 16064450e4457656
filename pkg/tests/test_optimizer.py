import warnings

import numpy as np
import pytest

from isac_evd.capacity import ergodic_rate
from isac_evd.optimizer import (
    DegenerateObjectiveWarning,
    OptimizationResult,
    cfar_baseline,
    joint_solve,
    null_upper_quantile,
    solve_power_split,
    solve_threshold,
    total_error_objective,
    verify_convexity,
)


def test_power_split_extremes(calibrated):
    rho, ok = solve_power_split(1e-12, calibrated)
    assert ok and rho < 1e-6
    assert solve_power_split(50.0, calibrated) == (0.0, False)


def test_power_split_matches_calibrated_crossing(calibrated):
    # N_t = 2, R_min = 5: communication power 4.14 dBm
    cfg = calibrated.replace(total_power_dbm=10.0)
    rho, ok = solve_power_split(5.0, cfg)
    assert ok
    assert 10.0 + 10 * np.log10(rho) == pytest.approx(4.14, abs=1e-6)


def test_quadratic_objective_is_recovered_exactly(calibrated):
    f = lambda t: 0.1 + (np.asarray(t) - 2.5) ** 2  # noqa: E731
    res = solve_threshold(0.5, calibrated, objective=f, bounds=(0.1, 10.0))
    assert res.tau == pytest.approx(2.5, rel=1e-6)
    rep = verify_convexity(0.5, 2.5, calibrated, objective=f)
    assert rep.ok
    assert rep.first_derivative == pytest.approx(0.0, abs=1e-10)
    assert rep.second_derivative == pytest.approx(2.0, rel=1e-6)
    assert rep.bracket_violations == ()


def test_concave_points_are_reported_not_fatal(calibrated):
    # minimum at 1 with a concave bump inside +-20%
    f = lambda t: (t - 1.0) ** 2 - 0.02 * np.cos(40 * (t - 1.0))  # noqa: E731
    rep = verify_convexity(0.5, 1.0, calibrated, objective=f)
    assert rep.ok
    assert len(rep.bracket_violations) > 0
    assert "concave" in rep.describe()


def test_threshold_beats_dense_grid(calibrated):
    cfg = calibrated.replace(n_tx=8)
    res = solve_threshold(cfg.rho_c, cfg)
    f = total_error_objective(cfg)
    grid = np.geomspace(cfg.sigma_s2 * 1e-2, null_upper_quantile(cfg), 10_000)
    assert res.p_e <= np.min(f(grid)) + 1e-12


def test_calibrated_nt8_regression(calibrated):
    res = solve_threshold(0.9, calibrated.replace(n_tx=8))
    assert res.tau == pytest.approx(1.8906262511094436, rel=1e-5)
    assert res.p_e == pytest.approx(0.08449941349449058, rel=1e-8)


def test_flat_objective_warns_and_returns_midpoint(calibrated):
    cfg = calibrated.replace(total_power_dbm=-200.0)
    with pytest.warns(DegenerateObjectiveWarning):
        res = solve_threshold(0.5, cfg)
    assert res.degenerate and res.p_e == pytest.approx(0.5)
    rep = verify_convexity(0.5, res.tau, cfg)
    assert not rep.ok and "flat" in rep.reason


def test_tiny_sensing_power_gives_chance_level(calibrated):
    cfg = calibrated.replace(total_power_dbm=-40.0)
    res = solve_threshold(0.5, cfg)
    assert res.p_e == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize("nt", [2, 8])
def test_calibrated_convexity(nt, calibrated):
    res = joint_solve(5.0, calibrated.replace(n_tx=nt, total_power_dbm=10.0))
    assert res.convexity_ok, res.convexity.describe()


def test_joint_solve_feasible_and_infeasible(calibrated):
    cfg = calibrated.replace(total_power_dbm=10.0)
    res = joint_solve(5.0, cfg)
    assert res.feasible
    assert res.achieved_rate == pytest.approx(5.0, abs=1e-6)
    assert res.rho_c_star > 0
    assert res.p_e_star == pytest.approx(0.5 * (res.p_f_star + res.p_md_star))
    off = joint_solve(20.0, calibrated)
    assert not off.feasible and off.rho_c_star == 0.0 and off.achieved_rate == 0.0
    all_sense = solve_threshold(0.0, calibrated)
    assert off.p_e_star == pytest.approx(all_sense.p_e, rel=1e-12)


def test_minimal_split_property(calibrated):
    cfg = calibrated.replace(total_power_dbm=11.0)
    res = joint_solve(5.0, cfg)
    assert ergodic_rate(res.rho_c_star - 1e-4, cfg).rate_bps_hz < 5.0


def test_joint_never_loses_to_cfar(calibrated):
    for P in (6.0, 9.0, 12.0):
        cfg = calibrated.replace(total_power_dbm=P)
        res = joint_solve(5.0, cfg)
        base = cfar_baseline(res.rho_c_star, cfg)
        assert base.p_f == pytest.approx(0.1, abs=1e-8)
        assert res.p_e_star <= base.p_e + 1e-12


def test_more_power_never_hurts_when_feasible(calibrated):
    prev = 1.0
    for P in np.arange(5.0, 13.0, 1.0):
        res = joint_solve(5.0, calibrated.replace(total_power_dbm=float(P)))
        assert res.feasible
        assert res.p_e_star <= prev + 1e-12
        prev = res.p_e_star


def test_result_invariants():
    with pytest.raises(ValueError):
        OptimizationResult(1.5, 1.0, 0.1, 1.0, True, True, 3)
    with pytest.raises(ValueError):
        OptimizationResult(0.5, 1.0, 0.6, 1.0, True, True, 3)
