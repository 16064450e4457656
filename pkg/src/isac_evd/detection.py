"""Closed-form distribution of the largest sample-covariance eigenvalue.

Both CDFs are written natively in terms of the raw eigenvalue T of R R^H;
the ``scaling`` argument says whether the caller's threshold is that raw
value or the sample-mean value T / K.

Under H1 (rank-one mean along g2, covariance sigma^2 I + beta^2 g2 g2^H) the
CDF is a three-term combination of the C_k integrals:

    F1(T) = A B_K C_{K-1}(1/b) / (K-1)
            - A (K-2)! e^{-u} u^{-K} C_0(1/b - 1/sigma^2)
            + sum_k A (K-2)! e^{-u} u^{k-K} / k! * C_k(1/b)

with u = T / sigma^2, c = a / b^2 throughout and
A = e^{-a/b} T^{2K} / (Gamma(K) Gamma(K-1) sigma^{2K} b^K).

Under H0 the same expression with a = beta = 0 collapses to

    F0(T) = P(K, u)^2 - e^{-u} u^K / Gamma(K)
            + e^{-u} u^{K-1} / Gamma(K) * sum_{k<K} P(k+1, u)

where P is the regularized lower incomplete gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .montecarlo import (
    DetectionCurve,
    Hypothesis,
    Scaling,
    run_batch,
)
from .special_math import (
    DEFAULT_CONTROL,
    SeriesControl,
    c_series_scaled,
    neumaier_sum,
    regularized_lower_gamma,
)
from .system_model import DerivedParams, SystemConfig, derive

__all__ = [
    "FormulaIntegrityError",
    "DetectionPoint",
    "DEFAULT_SCALING",
    "cdf_h0",
    "cdf_h0_as_printed",
    "cdf_h1",
    "pf",
    "pd",
    "total_error",
    "detection_point",
    "analytic_curve",
    "cfar_threshold",
    "ScalingArbitration",
    "arbitrate_scaling",
    "sup_norm_vs_empirical",
]

DEFAULT_SCALING = Scaling.SAMPLE_MEAN
_BOUND_SLACK = 1e-9


class FormulaIntegrityError(ArithmeticError):
    """A CDF left [0, 1] by more than rounding noise."""


@dataclass(frozen=True)
class DetectionPoint:
    tau: float
    p_f: float
    p_d: float

    @property
    def p_md(self) -> float:
        return 1.0 - self.p_d

    @property
    def p_e(self) -> float:
        return 0.5 * (self.p_f + self.p_md)


def _check_bounds(values: np.ndarray, label: str) -> np.ndarray:
    bad = (values < -_BOUND_SLACK) | (values > 1.0 + _BOUND_SLACK) | ~np.isfinite(values)
    if np.any(bad):
        worst = values[bad].flat[0]
        raise FormulaIntegrityError(f"{label} evaluated to {worst!r}, outside [0, 1]")
    return np.clip(values, 0.0, 1.0)


def _raw_threshold(tau, config: SystemConfig, scaling) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("threshold must be nonnegative")
    return np.asarray(Scaling(scaling).to_raw(tau, config.samples), dtype=float)


def _as_output(values: np.ndarray, like):
    return values if np.ndim(like) else float(values.reshape(-1)[0])


def cdf_h0(tau, config: SystemConfig, scaling=DEFAULT_SCALING):
    """P(lambda_max <= tau) under H0."""
    K = config.samples
    if K < 2:
        raise ValueError("the null CDF needs K >= 2")
    T = np.atleast_1d(_raw_threshold(tau, config, scaling))
    out = np.zeros_like(T)
    pos = T > 0
    if np.any(pos):
        u = T[pos] / config.sigma_s2
        logu = np.log(u)
        lg_k = math.lgamma(K)
        head = regularized_lower_gamma(K, u) ** 2
        mid = np.exp(-u + K * logu - lg_k)
        tail_w = np.exp(-u + (K - 1) * logu - lg_k)
        tail = neumaier_sum(regularized_lower_gamma(k + 1, u) for k in range(K))
        out[pos] = neumaier_sum([head, -mid, tail_w * tail])
    return _as_output(_check_bounds(out, "null CDF"), tau)


def cdf_h0_as_printed(tau, config: SystemConfig, scaling=DEFAULT_SCALING):
    """The null CDF with the grouping exactly as typeset in the source.

    Kept only so the validation report can show that this form is not a
    distribution function; it returns raw values without bound checks.
    """
    K = config.samples
    T = np.atleast_1d(_raw_threshold(tau, config, scaling))
    u = T / config.sigma_s2
    gk = math.gamma(K)
    low = regularized_lower_gamma(K, u) * gk
    first = (gk - low**2) / gk**2
    second = np.exp(-u) * u**K / gk
    third = np.exp(-u) * u ** (K - 1) / gk * sum(
        (math.factorial(k) - regularized_lower_gamma(k + 1, u) * math.factorial(k)) / math.factorial(k) for k in range(K)
    )
    return _as_output(first - second + third, tau)


def cdf_h1(
    tau,
    derived: DerivedParams,
    config: SystemConfig,
    ctl: SeriesControl = DEFAULT_CONTROL,
    scaling=DEFAULT_SCALING,
):
    """P(lambda_max <= tau) under H1, via the C_k series.

    Requires a > 0, beta_c^2 > 0 and K >= 3.
    """
    K = config.samples
    if K < 3:
        raise ValueError("the H1 closed form needs K >= 3")
    if not (derived.a > 0 and derived.beta_c2 > 0):
        raise ValueError("the H1 closed form needs a > 0 and beta_c^2 > 0")
    T = np.atleast_1d(_raw_threshold(tau, config, scaling))
    out = np.zeros_like(T)
    pos = T > 0
    if np.any(pos):
        out[pos] = _cdf_h1_raw(T[pos], derived, config, ctl)
    return _as_output(_check_bounds(out, "H1 CDF"), tau)


def _cdf_h1_raw(T: np.ndarray, derived: DerivedParams, config: SystemConfig, ctl: SeriesControl) -> np.ndarray:
    K = config.samples
    sigma2 = config.sigma_s2
    a, b = derived.a, derived.b
    c = a / b**2
    s_main = 1.0 / b
    s_cross = -derived.beta_c2 * derived.g2_norm2 / (b * sigma2)

    u = T / sigma2
    logT = np.log(T)
    logu = np.log(u)
    lg_km1 = math.lgamma(K - 1)  # log (K-2)!
    logA = -a / b + 2 * K * logT - math.lgamma(K) - lg_km1 - K * math.log(sigma2) - K * math.log(b)

    C, shift = c_series_scaled(np.arange(K), s_main, c, T, K, ctl)
    C0, shift0 = c_series_scaled([0], s_cross, c, T, K, ctl)
    C0 = C0[0]

    # A * B_K / (K-1), with B_K = (K-1)! P(K, u) / u^K
    log_t1 = logA + shift + math.lgamma(K) - K * logu - math.log(K - 1)
    terms = [np.exp(log_t1) * regularized_lower_gamma(K, u) * C[K - 1]]
    terms.append(-np.exp(logA + shift0 + lg_km1 - u - K * logu) * C0)
    for k in range(K):
        terms.append(np.exp(logA + shift + lg_km1 - u - math.lgamma(k + 1) - (K - k) * logu) * C[k])
    return neumaier_sum(terms)


def pf(tau, config: SystemConfig, scaling=DEFAULT_SCALING):
    """False-alarm probability 1 - F0(tau)."""
    return 1.0 - cdf_h0(tau, config, scaling)


def pd(tau, derived: DerivedParams, config: SystemConfig, scaling=DEFAULT_SCALING, ctl: SeriesControl = DEFAULT_CONTROL):
    """Detection probability 1 - F1(tau).

    The closed form needs both a target echo (a > 0) and leaked
    communication power (beta_c^2 > 0). When one of them is exactly zero it
    is evaluated in the limit where that quantity shrinks to 1e-12 of its
    scale; with neither, H1 coincides with H0.
    """
    if derived.a <= 0 and derived.beta_c2 <= 0:
        return pf(tau, config, scaling)
    if derived.a <= 0:
        derived = replace(derived, a=1e-12 * derived.b)
    if derived.beta_c2 <= 0:
        beta_c2 = 1e-12 * config.sigma_s2
        derived = replace(derived, beta_c2=beta_c2, b=config.sigma_s2 + beta_c2 * derived.g2_norm2)
    return 1.0 - cdf_h1(tau, derived, config, ctl, scaling)


def total_error(tau, rho_c: float, config: SystemConfig, scaling=DEFAULT_SCALING):
    """P_e = (P_F + 1 - P_D) / 2 at power split ``rho_c``."""
    cfg = config.replace(rho_c=rho_c)
    derived = derive(cfg)
    return 0.5 * (pf(tau, cfg, scaling) + 1.0 - pd(tau, derived, cfg, scaling))


def detection_point(tau: float, derived: DerivedParams, config: SystemConfig, scaling=DEFAULT_SCALING) -> DetectionPoint:
    return DetectionPoint(float(tau), float(pf(tau, config, scaling)), float(pd(tau, derived, config, scaling)))


def analytic_curve(tau_grid, derived: DerivedParams, config: SystemConfig, scaling=DEFAULT_SCALING) -> DetectionCurve:
    tau_grid = np.asarray(tau_grid, dtype=float)
    return DetectionCurve(
        tau=tau_grid,
        p_f=np.asarray(pf(tau_grid, config, scaling)),
        p_d=np.asarray(pd(tau_grid, derived, config, scaling)),
        source="analytic",
        metadata={"scaling": Scaling(scaling).value},
    )


def cfar_threshold(alpha: float, config: SystemConfig, scaling=DEFAULT_SCALING, tol: float = 1e-9) -> float:
    """Threshold with P_F(tau) = alpha, by bisection on the decreasing P_F."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    lo, hi = 0.0, config.sigma_s2
    while pf(hi, config, scaling) > alpha:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        p = pf(mid, config, scaling)
        if abs(p - alpha) < tol:
            return mid
        if p > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ScalingArbitration:
    """Which threshold convention each closed form follows natively.

    ``sup_norms`` maps (formula, convention) to the sup-norm distance between
    the formula evaluated with that convention and the sampler.
    """

    null_native: Scaling
    h1_native: Scaling
    sup_norms: dict
    trials: int

    def describe(self) -> str:
        lines = [
            f"null CDF argument K*tau/sigma^2 is native to {self.null_native.value}",
            f"H1 CDF argument tau/sigma^2 is native to {self.h1_native.value}",
        ]
        for (formula, conv), d in sorted(self.sup_norms.items()):
            lines.append(f"  {formula:>4s} read as {conv:<11s} sup-norm {d:.4f}")
        return "\n".join(lines)


def sup_norm_vs_empirical(cdf, samples: np.ndarray, n_grid: int = 400) -> float:
    """max |F(tau) - F_emp(tau)| on a quantile grid spanning the samples."""
    ordered = np.sort(samples)
    qs = np.linspace(0.0005, 0.9995, n_grid)
    grid = np.quantile(ordered, qs)
    emp = np.searchsorted(ordered, grid, side="right") / ordered.size
    return float(np.max(np.abs(np.asarray(cdf(grid)) - emp)))


def arbitrate_scaling(config: SystemConfig, trials: int = 200_000, seed: int | None = None) -> ScalingArbitration:
    """Decide, against the sampler, which threshold convention each formula uses.

    Both formulas are evaluated at the raw-sum statistic under two readings
    of their argument: literally (raw) and with the threshold multiplied by
    K (sample mean). The reading with the smaller sup-norm wins.
    """
    derived = derive(config)
    K = config.samples
    lam0 = run_batch(Hypothesis.H0, derived, config, trials, Scaling.RAW_SUM, seed).lambda_samples
    lam1 = run_batch(Hypothesis.H1, derived, config, trials, Scaling.RAW_SUM, seed).lambda_samples

    # cdf_h0(x, SAMPLE_MEAN) evaluates the formula with u = K x / sigma^2
    null_as = {
        Scaling.SAMPLE_MEAN: lambda T: cdf_h0(T / K, config, Scaling.SAMPLE_MEAN),
        Scaling.RAW_SUM: lambda T: cdf_h0(T, config, Scaling.SAMPLE_MEAN),
    }
    # the H1 formula takes u = tau/sigma^2
    h1_as = {
        Scaling.RAW_SUM: lambda T: cdf_h1(T, derived, config, scaling=Scaling.RAW_SUM),
        Scaling.SAMPLE_MEAN: lambda T: cdf_h1(T / K, derived, config, scaling=Scaling.RAW_SUM),
    }
    norms = {}
    for conv, f in null_as.items():
        norms[("null", conv.value)] = sup_norm_vs_empirical(f, lam0)
    for conv, f in h1_as.items():
        norms[("h1", conv.value)] = sup_norm_vs_empirical(f, lam1)
    null_native = min(null_as, key=lambda c: norms[("null", c.value)])
    h1_native = min(h1_as, key=lambda c: norms[("h1", c.value)])
    return ScalingArbitration(null_native, h1_native, norms, trials)
