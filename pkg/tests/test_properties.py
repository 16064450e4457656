import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from isac_evd.capacity import ergodic_rate
from isac_evd.detection import cdf_h0, cdf_h1
from isac_evd.montecarlo import Scaling, max_eig_2x2
from isac_evd.special_math import exp_moments, regularized_lower_gamma
from isac_evd.system_model import SystemConfig, derive, dump_config, load_config

finite = dict(allow_nan=False, allow_infinity=False)


@given(st.integers(1, 40), st.floats(0, 200, **finite), st.floats(0, 200, **finite))
def test_regularized_gamma_is_a_cdf_in_x(n, x1, x2):
    lo, hi = sorted((x1, x2))
    p_lo, p_hi = regularized_lower_gamma(n, lo), regularized_lower_gamma(n, hi)
    assert 0.0 <= p_lo <= p_hi <= 1.0 + 1e-15


@given(st.floats(-50, 300, **finite), st.integers(1, 30))
def test_exp_moment_recurrence(z, jmax):
    m = exp_moments(np.array([z]), jmax)[0]
    j = np.arange(1, jmax + 1)
    # integration by parts: j m_{j-1} = z m_j + e^{-z}
    lhs = j * m[:-1]
    rhs = z * m[1:] + math.exp(-z)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-300)
    assert np.all(m > 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 20), st.floats(-5, 5, **finite))
def test_null_cdf_monotone_and_bounded(K, s2_dbm):
    cfg = SystemConfig(samples=K, n_tx=1, sigma_s2_dbm=s2_dbm)
    taus = np.linspace(0.01, 6.0, 200) * cfg.sigma_s2
    vals = cdf_h0(taus, cfg)
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(np.diff(vals) >= -1e-13)


@settings(max_examples=25, deadline=None)
@given(
    st.sampled_from([1, 2, 4, 8]),
    st.integers(3, 16),
    st.floats(0.0, 12.0, **finite),
    st.floats(0.05, 0.95, **finite),
    st.floats(0.05, 0.6, **finite),
)
def test_h1_cdf_monotone_and_bounded(nt, K, P, rho_c, gain):
    cfg = SystemConfig(n_tx=min(nt, K), samples=K, total_power_dbm=P, rho_c=rho_c, gain_t=gain)
    d = derive(cfg)
    taus = np.linspace(0.02, 12.0, 300)
    vals = cdf_h1(taus, d, cfg)
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(np.diff(vals) >= -1e-10)
    # a target can only push the eigenvalue up
    assert np.all(vals <= cdf_h0(taus, cfg) + 1e-10)


@given(st.floats(1e-6, 1e6, **finite), st.integers(1, 64), st.sampled_from(list(Scaling)))
def test_scaling_round_trip(tau, K, scaling):
    assert math.isclose(scaling.from_raw(scaling.to_raw(tau, K), K), tau, rel_tol=1e-15)


@given(
    st.floats(-1e3, 1e3, **finite),
    st.floats(-1e3, 1e3, **finite),
    st.floats(-1e3, 1e3, **finite),
    st.floats(-1e3, 1e3, **finite),
)
def test_max_eig_bounds(a, d, re, im):
    m = np.array([[a, re + 1j * im], [re - 1j * im, d]])
    lam = max_eig_2x2(m)
    assert lam >= max(a, d) - 1e-9 * max(1.0, abs(a), abs(d))
    assert lam <= max(a, d) + math.hypot(re, im) + 1e-9 * max(1.0, abs(a), abs(d), abs(re), abs(im))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([1, 2, 3, 8]), st.floats(-10, 20, **finite), st.floats(0.01, 0.99, **finite))
def test_rate_increases_with_split(nt, P, rho):
    cfg = SystemConfig(n_tx=nt, total_power_dbm=P)
    assert ergodic_rate(rho, cfg).rate_bps_hz < ergodic_rate(min(1.0, rho + 0.01), cfg).rate_bps_hz


@settings(max_examples=30, deadline=None)
@given(
    st.integers(1, 8),
    st.integers(8, 32),
    st.floats(-20, 30, **finite),
    st.floats(0, 1, **finite),
    st.floats(0.01, 10, **finite),
    st.integers(0, 2**64 - 1),
)
def test_config_text_round_trip(tmp_path_factory, nt, K, P, rho, gain, seed):
    cfg = SystemConfig(n_tx=nt, samples=K, total_power_dbm=P, rho_c=rho, gain_r=gain, seed=seed)
    path = tmp_path_factory.mktemp("cfg") / "c.toml"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
