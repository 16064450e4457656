"""Ergodic rate of the 2 x N_t communication link."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .montecarlo import STREAM_CAPACITY, CounterStream
from .special_math import j_function
from .system_model import SystemConfig

__all__ = ["RateMethod", "RateResult", "PowerSplit", "ergodic_rate", "ergodic_rate_mc", "rate_inverse", "inverse_snr"]

_LN2 = math.log(2.0)


class RateMethod(str, enum.Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class RateResult:
    rate_bps_hz: float
    method: RateMethod
    stderr: float = 0.0

    def __post_init__(self):
        if self.rate_bps_hz < 0:
            raise ValueError("rate must be nonnegative")
        if self.method is RateMethod.ANALYTIC and self.stderr != 0.0:
            raise ValueError("analytic rates carry no stderr")


class PowerSplit(NamedTuple):
    rho_c: float
    feasible: bool


def inverse_snr(rho_c: float, config: SystemConfig) -> float:
    """mu = N_t sigma_c^2 / (rho_c P var), the argument of the J functions."""
    return config.n_tx * config.sigma_c2 / (rho_c * config.total_power * config.comm_channel_var)


def ergodic_rate(rho_c: float, config: SystemConfig) -> RateResult:
    """Closed-form ergodic rate in bps/Hz.

    For N_t >= 2 the log-det average expands over the Laguerre-form
    eigenvalue density of H H^H into
    N_t/(N_t-2)! J_{N_t-1} - 2/(N_t-2)! J_{N_t} + 1/(N_t-1)! J_{N_t+1}.
    With one transmit antenna H H^H has a single Gamma(2) eigenvalue and
    the rate is J_2(mu).
    """
    if not 0.0 <= rho_c <= 1.0:
        raise ValueError("rho_c must lie in [0, 1]")
    if rho_c == 0.0:
        return RateResult(0.0, RateMethod.ANALYTIC)
    mu = inverse_snr(rho_c, config)
    if not math.isfinite(mu) or mu <= 0:
        raise OverflowError(f"effective inverse SNR out of range: {mu!r}")
    nt = config.n_tx
    if nt == 1:
        nats = j_function(2, mu)
    else:
        c = math.factorial(nt - 2)
        nats = math.fsum(
            [
                nt / c * j_function(nt - 1, mu),
                -2.0 / c * j_function(nt, mu),
                1.0 / math.factorial(nt - 1) * j_function(nt + 1, mu),
            ]
        )
    return RateResult(max(nats, 0.0) / _LN2, RateMethod.ANALYTIC)


def ergodic_rate_mc(rho_c: float, config: SystemConfig, trials: int = 100_000, seed: int | None = None) -> RateResult:
    """Sample mean of log2 det(I + rho_c P / (N_t sigma_c^2) H H^H)."""
    if trials < 1000:
        raise ValueError("trials must be at least 1000")
    if rho_c == 0.0:
        return RateResult(0.0, RateMethod.MONTE_CARLO, 0.0)
    nt = config.n_tx
    seed = config.seed if seed is None else seed
    stream = CounterStream(seed, STREAM_CAPACITY, 2 * nt)
    snr = rho_c * config.total_power / (nt * config.sigma_c2)
    rates = np.empty(trials)
    chunk = 100_000
    for start in range(0, trials, chunk):
        count = min(chunk, trials - start)
        H = math.sqrt(config.comm_channel_var) * stream.normals(start, count).reshape(count, 2, nt)
        G = np.einsum("nik,njk->nij", H, H.conj())
        # det(I + snr G) for Hermitian 2x2 G
        det = (1 + snr * G[:, 0, 0].real) * (1 + snr * G[:, 1, 1].real) - snr**2 * np.abs(G[:, 0, 1]) ** 2
        rates[start : start + count] = np.log2(det)
    return RateResult(float(rates.mean()), RateMethod.MONTE_CARLO, float(rates.std(ddof=1) / math.sqrt(trials)))


def rate_inverse(r_min: float, config: SystemConfig, tol: float = 1e-9, max_iter: int = 200) -> PowerSplit:
    """Smallest rho_c whose ergodic rate reaches ``r_min``.

    Returns ``PowerSplit(0.0, False)`` when even rho_c = 1 falls short. The
    feasible answer is the upper end of the final bisection bracket, so its
    rate is never below ``r_min``.
    """
    if r_min <= 0:
        raise ValueError("r_min must be positive")
    rate = lambda rho: ergodic_rate(rho, config).rate_bps_hz  # noqa: E731
    if rate(1.0) < r_min:
        return PowerSplit(0.0, False)
    lo, hi = 1e-9, 1.0
    if rate(lo) >= r_min:
        return PowerSplit(lo, True)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = rate(mid)
        if r >= r_min:
            hi = mid
        else:
            lo = mid
        if r >= r_min and r - r_min < tol:
            break
        if hi - lo < 1e-15:
            break
    return PowerSplit(hi, True)
