import math

import pytest

from isac_evd.capacity import RateMethod, RateResult, ergodic_rate, ergodic_rate_mc, inverse_snr, rate_inverse
from isac_evd.system_model import SystemConfig, mw_to_dbm

# Ergodic rates (bps/Hz) from direct integration of the complex Wishart
# eigenvalue density with scipy dblquad; (n_tx, per-antenna SNR, rate)
RATE_REF = [
    (1, 1.0, 1.4426950408889634),
    (1, 10.0, 4.058558368462288),
    (2, 1.0, 2.5810421468126576),
    (2, 31.6227766, 10.061803886897026),
    (4, 10.0, 9.923878108046427),
    (8, 100.0, 18.90232851580866),
]


def _config(nt, snr):
    return SystemConfig(n_tx=nt, total_power_dbm=mw_to_dbm(snr * nt), rho_c=1.0)


@pytest.mark.parametrize("nt,snr,ref", RATE_REF)
def test_closed_form_matches_density_integral(nt, snr, ref):
    assert ergodic_rate(1.0, _config(nt, snr)).rate_bps_hz == pytest.approx(ref, rel=1e-12)


def test_channel_variance_enters_as_snr():
    a = ergodic_rate(1.0, _config(2, 10.0).replace(comm_channel_var=2.0)).rate_bps_hz
    b = ergodic_rate(1.0, _config(2, 20.0)).rate_bps_hz
    assert a == pytest.approx(b, rel=1e-14)
    assert inverse_snr(1.0, _config(2, 10.0)) == pytest.approx(0.1)


def test_zero_power_and_domain():
    assert ergodic_rate(0.0, SystemConfig()).rate_bps_hz == 0.0
    with pytest.raises(ValueError):
        ergodic_rate(1.5, SystemConfig())


def test_monte_carlo_agrees():
    cfg = _config(4, 3.0)
    mc = ergodic_rate_mc(1.0, cfg, 50_000)
    assert mc.method is RateMethod.MONTE_CARLO
    assert abs(mc.rate_bps_hz - ergodic_rate(1.0, cfg).rate_bps_hz) < 4 * mc.stderr
    with pytest.raises(ValueError):
        ergodic_rate_mc(1.0, cfg, 10)


def test_rate_result_invariants():
    with pytest.raises(ValueError):
        RateResult(-1.0, RateMethod.ANALYTIC)
    with pytest.raises(ValueError):
        RateResult(1.0, RateMethod.ANALYTIC, stderr=0.1)


def test_rate_inverse_minimal_split():
    cfg = SystemConfig(total_power_dbm=12.0, comm_channel_var=3.0)
    rho, ok = rate_inverse(5.0, cfg)
    assert ok and 0 < rho < 1
    assert ergodic_rate(rho, cfg).rate_bps_hz >= 5.0
    assert ergodic_rate(rho, cfg).rate_bps_hz == pytest.approx(5.0, abs=1e-6)
    assert ergodic_rate(rho - 1e-4, cfg).rate_bps_hz < 5.0


def test_rate_inverse_extremes():
    cfg = SystemConfig(total_power_dbm=8.0)
    assert rate_inverse(1e-12, cfg) == (1e-9, True)
    assert rate_inverse(100.0, cfg) == (0.0, False)
    with pytest.raises(ValueError):
        rate_inverse(0.0, cfg)


def test_calibrated_crossing_at_reference_power(calibrated):
    rho, ok = rate_inverse(5.0, calibrated.replace(total_power_dbm=30.0))
    assert ok
    assert 30.0 + 10 * math.log10(rho) == pytest.approx(4.14, abs=1e-6)
