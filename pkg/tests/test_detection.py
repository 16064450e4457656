import numpy as np
import pytest

from isac_evd import detection
from isac_evd.detection import (
    FormulaIntegrityError,
    analytic_curve,
    arbitrate_scaling,
    cdf_h0,
    cdf_h0_as_printed,
    cdf_h1,
    cfar_threshold,
    detection_point,
    pd,
    pf,
    sup_norm_vs_empirical,
    total_error,
)
from isac_evd.montecarlo import Scaling, run_batch
from isac_evd.system_model import SystemConfig, derive, mw_to_dbm

# P(lambda_max(R R^H) <= T) for central complex Wishart, by scipy dblquad over
# the joint eigenvalue density; (T, K, sigma^2, value)
NULL_REF = [
    (9.6, 8, 1.0, 0.33221927103565163),
    (4.0, 4, 1.0, 0.1682833351963459),
    (20.0, 16, 1.0, 0.4838574923525561),
    (5.0, 4, 0.5, 0.9339315161310479),
    (30.0, 8, 2.0, 0.891421309465315),
    (12.0, 10, 1.0, 0.3500033401774561),
]


def _cfg(K, s2, **kw):
    return SystemConfig(samples=K, sigma_s2_dbm=mw_to_dbm(s2), **kw)


@pytest.mark.parametrize("T,K,s2,ref", NULL_REF)
def test_null_cdf_matches_density_integral(T, K, s2, ref):
    cfg = _cfg(K, s2)
    assert cdf_h0(T, cfg, Scaling.RAW_SUM) == pytest.approx(ref, abs=1e-12)
    assert cdf_h0(T / K, cfg, Scaling.SAMPLE_MEAN) == pytest.approx(ref, abs=1e-12)


def test_null_cdf_limits_and_monotone():
    cfg = _cfg(8, 1.0)
    assert cdf_h0(1e-9, cfg) == pytest.approx(0.0, abs=1e-12)
    assert cdf_h0(0.0, cfg) == 0.0
    assert cdf_h0(50.0, cfg) == pytest.approx(1.0, abs=1e-12)
    vals = cdf_h0(np.linspace(0.01, 5.0, 1000), cfg)
    assert np.all(np.diff(vals) >= 0)
    with pytest.raises(ValueError):
        cdf_h0(-1.0, cfg)


def test_null_cdf_against_sampler_k8():
    cfg = _cfg(8, 1.0)
    lam = run_batch("H0", derive(cfg), cfg, 1_000_000, Scaling.SAMPLE_MEAN).lambda_samples
    assert abs(cdf_h0(1.2, cfg) - np.mean(lam <= 1.2)) < 0.003


def test_typeset_null_form_is_not_a_distribution():
    cfg = _cfg(8, 1.0)
    printed = cdf_h0_as_printed(np.linspace(0.05, 3.0, 60), cfg)
    assert printed.min() < -0.1


def test_h1_cdf_against_sampler_calibrated_nt8(calibrated):
    cfg = calibrated.replace(n_tx=8, total_power_dbm=8.0, rho_c=0.9)
    d = derive(cfg)
    lam = run_batch("H1", d, cfg, 1_000_000).lambda_samples
    assert sup_norm_vs_empirical(lambda t: cdf_h1(t, d, cfg), lam) < 0.005


def test_h1_cdf_regression_value(calibrated):
    assert cdf_h1(1.5, derive(calibrated), calibrated) == pytest.approx(0.024287648841508393, rel=1e-9)


def test_h1_monotone_bounded_on_fine_grid(calibrated):
    d = derive(calibrated)
    vals = cdf_h1(np.linspace(0.01, 12.0, 1000), d, calibrated)
    assert np.all(np.diff(vals) >= -1e-12)
    assert vals[0] >= 0 and vals[-1] <= 1
    assert vals[-1] == pytest.approx(1.0, abs=1e-6)


def test_roc_above_diagonal(calibrated):
    for nt in (1, 2, 8):
        for P in (6.0, 8.0, 10.0):
            cfg = calibrated.replace(n_tx=nt, total_power_dbm=P)
            taus = np.linspace(0.05, 5.0, 200)
            assert np.all(pd(taus, derive(cfg), cfg) >= pf(taus, cfg) - 1e-12)


def test_vanishing_transmit_power_approaches_null(calibrated):
    # both the target echo and the leaked communication signal fade out
    cfg = calibrated.replace(total_power_dbm=calibrated.total_power_dbm - 60.0)
    taus = np.linspace(0.05, 5.0, 200)
    assert np.max(np.abs(cdf_h1(taus, derive(cfg), cfg) - cdf_h0(taus, cfg))) < 0.01


def test_vanishing_sensing_share_leaves_only_the_leak(calibrated):
    # with no echo the statistic follows the leak-only correlated Wishart, which the sampler gives
    cfg = calibrated.replace(rho_c=1.0 - 1e-6 * calibrated.rho_s)
    d = derive(cfg)
    lam = run_batch("H1", d, cfg, 200_000).lambda_samples
    assert sup_norm_vs_empirical(lambda t: cdf_h1(t, d, cfg), lam) < 0.01


def test_h1_scope_checks(calibrated):
    d = derive(calibrated)
    with pytest.raises(ValueError):
        cdf_h1(1.0, d, calibrated.replace(samples=2))
    no_sense = calibrated.replace(rho_c=1.0)
    with pytest.raises(ValueError):
        cdf_h1(1.0, derive(no_sense), no_sense)


def test_pd_fallbacks(calibrated):
    # all power on the link: the target still reflects the leaked signal
    all_comm = calibrated.replace(rho_c=1.0)
    lam = run_batch("H1", derive(all_comm), all_comm, 200_000).lambda_samples
    taus = np.quantile(lam, [0.1, 0.5, 0.9])
    assert np.allclose(pd(taus, derive(all_comm), all_comm), [0.9, 0.5, 0.1], atol=0.006)
    silent = calibrated.replace(total_power_dbm=-400.0)
    assert pd(1.0, derive(silent), silent) == pytest.approx(pf(1.0, silent), abs=1e-12)
    # no leak at all: the closed form is taken in the beta -> 0 limit
    sense_only = calibrated.replace(rho_c=0.0)
    lam = run_batch("H1", derive(sense_only), sense_only, 200_000).lambda_samples
    taus = np.quantile(lam, [0.1, 0.5, 0.9])
    assert np.allclose(pd(taus, derive(sense_only), sense_only), [0.9, 0.5, 0.1], atol=0.006)


def test_pf_pd_limits(calibrated):
    d = derive(calibrated)
    assert pf(1e-9, calibrated) == pytest.approx(1.0)
    assert pd(1e-9, d, calibrated) == pytest.approx(1.0)
    assert pf(100.0, calibrated) == pytest.approx(0.0, abs=1e-12)
    assert pd(100.0, d, calibrated) == pytest.approx(0.0, abs=1e-12)
    taus = np.linspace(0.1, 4.0, 100)
    for p in (pf(taus, calibrated), pd(taus, d, calibrated)):
        inner = (p > 1e-12) & (p < 1 - 1e-12)
        assert np.all(np.diff(p) <= 0)
        assert np.all(np.diff(p)[inner[1:] & inner[:-1]] < 0)


@pytest.mark.parametrize("alpha", [0.01, 0.1, 0.5])
def test_cfar_round_trip(alpha, calibrated):
    tau = cfar_threshold(alpha, calibrated)
    assert pf(tau, calibrated) == pytest.approx(alpha, abs=1e-9)


def test_cfar_calibrated_regression_and_limits(calibrated):
    assert cfar_threshold(0.1, calibrated) == pytest.approx(1.793700698763132, rel=1e-8)
    assert cfar_threshold(1 - 1e-6, calibrated) < cfar_threshold(0.5, calibrated) < cfar_threshold(0.01, calibrated)
    with pytest.raises(ValueError):
        cfar_threshold(1.0, calibrated)


def test_total_error_shape(calibrated):
    cfg = calibrated.replace(n_tx=8)
    assert total_error(1e-6, cfg.rho_c, cfg) == pytest.approx(0.5, abs=1e-9)
    assert total_error(100.0, cfg.rho_c, cfg) == pytest.approx(0.5, abs=1e-9)
    grid = np.linspace(0.05, 5.0, 400)
    assert np.min(total_error(grid, cfg.rho_c, cfg)) < 0.5


def test_detection_point_invariants(calibrated):
    pt = detection_point(1.8, derive(calibrated), calibrated)
    assert pt.p_md == pytest.approx(1 - pt.p_d)
    assert pt.p_e == pytest.approx(0.5 * (pt.p_f + pt.p_md))
    curve = analytic_curve([1.0, 2.0], derive(calibrated), calibrated)
    assert curve.source == "analytic" and curve.p_e.shape == (2,)


def test_integrity_error_is_raised_not_clipped():
    with pytest.raises(FormulaIntegrityError):
        detection._check_bounds(np.array([0.5, 1.0 + 1e-6]), "test")
    assert detection._check_bounds(np.array([-1e-12, 1 + 1e-12]), "test").tolist() == [0.0, 1.0]


def test_scaling_arbitration_outcome(calibrated):
    arb = arbitrate_scaling(calibrated, trials=100_000)
    assert arb.null_native is Scaling.SAMPLE_MEAN
    assert arb.h1_native is Scaling.RAW_SUM
    assert arb.sup_norms[("null", "raw_sum")] > 0.5
    assert "sample_mean" in arb.describe()
