"""Two-step joint design: power split from the rate constraint, then threshold.

The split is the smallest communication share that still meets R_min (any
extra power goes to sensing); when the constraint cannot be met at all the
whole budget goes to sensing. The threshold is then found by a coarse
log-spaced scan followed by golden-section refinement, since the total
error is only believed to be convex in tau, not proven to be.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .capacity import PowerSplit, ergodic_rate, rate_inverse
from .detection import DEFAULT_SCALING, DetectionPoint, cdf_h0, cfar_threshold, detection_point, pd, pf
from .system_model import SystemConfig, derive

__all__ = [
    "DegenerateObjectiveWarning",
    "ThresholdResult",
    "ConvexityReport",
    "OptimizationResult",
    "solve_power_split",
    "null_upper_quantile",
    "total_error_objective",
    "solve_threshold",
    "verify_convexity",
    "joint_solve",
    "cfar_baseline",
]

GRID_POINTS = 128
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_FLAT_TOL = 1e-12


class DegenerateObjectiveWarning(RuntimeWarning):
    """The total error is flat at 0.5, so no threshold is better than another."""


@dataclass(frozen=True)
class ThresholdResult:
    tau: float
    p_e: float
    iterations: int
    degenerate: bool = False


@dataclass(frozen=True)
class ConvexityReport:
    tau: float
    step: float
    first_derivative: float
    second_derivative: float
    ok: bool
    reason: str = ""
    # (tau, second derivative) pairs inside the +-20% bracket that dip below -1e-8
    bracket_violations: tuple = ()

    def describe(self) -> str:
        status = "ok" if self.ok else f"not ok ({self.reason})"
        text = (
            f"tau*={self.tau:.6g} h={self.step:.3g} P_e'={self.first_derivative:.3e} "
            f"P_e''={self.second_derivative:.3e} {status}"
        )
        if self.bracket_violations:
            text += f"; {len(self.bracket_violations)} concave points within +-20%"
        return text


@dataclass(frozen=True)
class OptimizationResult:
    rho_c_star: float
    tau_star: float
    p_e_star: float
    achieved_rate: float
    feasible: bool
    convexity_ok: bool
    iterations: int
    p_f_star: float = float("nan")
    p_md_star: float = float("nan")
    convexity: ConvexityReport | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.rho_c_star <= 1.0:
            raise ValueError("rho_c_star must lie in [0, 1]")
        if self.p_e_star > 0.5 + 1e-9:
            raise ValueError(f"p_e_star {self.p_e_star} exceeds 0.5")
        if self.achieved_rate < 0:
            raise ValueError("achieved_rate must be nonnegative")


def solve_power_split(r_min: float, config: SystemConfig) -> PowerSplit:
    """Minimal rho_c meeting ``r_min``; (0, False) when no split can."""
    return rate_inverse(r_min, config)


def null_upper_quantile(config: SystemConfig, scaling=DEFAULT_SCALING, eps: float = 1e-6) -> float:
    """Smallest doubling of sigma_s^2 at which the null CDF exceeds 1 - eps."""
    tau = config.sigma_s2
    while cdf_h0(tau, config, scaling) <= 1.0 - eps:
        tau *= 2.0
    return tau


def total_error_objective(config: SystemConfig, scaling=DEFAULT_SCALING) -> Callable:
    """tau -> P_e(tau) at the split already stored in ``config``."""
    derived = derive(config)

    def objective(tau):
        return 0.5 * (pf(tau, config, scaling) + 1.0 - pd(tau, derived, config, scaling))

    return objective


def _golden(f, lo: float, hi: float, rel_tol: float = 1e-6, max_iter: int = 200):
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    it = 0
    while hi - lo > rel_tol * 0.5 * (lo + hi) and it < max_iter:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
        it += 1
    return (x1, f1, it) if f1 <= f2 else (x2, f2, it)


def solve_threshold(
    rho_c: float,
    config: SystemConfig,
    scaling=DEFAULT_SCALING,
    objective: Callable | None = None,
    n_grid: int = GRID_POINTS,
    bounds: tuple | None = None,
) -> ThresholdResult:
    """Threshold minimizing P_e at split ``rho_c``.

    The scan covers [sigma_s^2 / 100, upper null quantile] unless ``bounds``
    is given. ``objective`` replaces P_e entirely, which lets tests feed in
    functions with a known minimizer.
    """
    cfg = config.replace(rho_c=rho_c)
    f = objective or total_error_objective(cfg, scaling)
    lo, hi = bounds or (cfg.sigma_s2 * 1e-2, null_upper_quantile(cfg, scaling))
    grid = np.geomspace(lo, hi, n_grid)
    values = np.asarray(f(grid), dtype=float)
    if np.all(np.abs(values - 0.5) < _FLAT_TOL):
        warnings.warn("total error is flat at 0.5; returning the scan midpoint", DegenerateObjectiveWarning, stacklevel=2)
        mid = float(grid[n_grid // 2])
        return ThresholdResult(mid, float(values[n_grid // 2]), 0, degenerate=True)
    i = int(np.argmin(values))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_grid - 1)]
    tau, p_e, it = _golden(lambda t: float(f(t)), float(a), float(b))
    if values[i] < p_e:
        tau, p_e = float(grid[i]), float(values[i])
    return ThresholdResult(float(tau), float(p_e), it)


def verify_convexity(
    rho_c: float,
    tau_star: float,
    config: SystemConfig,
    scaling=DEFAULT_SCALING,
    objective: Callable | None = None,
    bracket_points: int = 21,
) -> ConvexityReport:
    """Finite-difference check that tau* is a strict local minimum.

    Uses central differences with step 1e-4 tau*. Concave points within
    +-20% of tau* are listed but do not make the report fail.
    """
    cfg = config.replace(rho_c=rho_c)
    f = objective or total_error_objective(cfg, scaling)
    h = 1e-4 * tau_star

    def derivs(t):
        fm, f0, fp = (float(f(x)) for x in (t - h, t, t + h))
        return (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h), (fm, f0, fp)

    d1, d2, vals = derivs(tau_star)
    if all(abs(v - 0.5) < _FLAT_TOL for v in vals):
        return ConvexityReport(tau_star, h, d1, d2, False, "flat objective")
    violations = []
    for t in np.linspace(0.8 * tau_star, 1.2 * tau_star, bracket_points):
        dd = derivs(float(t))[1]
        if dd < -1e-8:
            violations.append((float(t), dd))
    reasons = []
    if abs(d1) >= 1e-5:
        reasons.append(f"|P_e'| = {abs(d1):.2e} >= 1e-5")
    if not d2 > 0:
        reasons.append(f"P_e'' = {d2:.2e} <= 0")
    return ConvexityReport(tau_star, h, d1, d2, not reasons, "; ".join(reasons), tuple(violations))


def joint_solve(r_min: float, config: SystemConfig, scaling=DEFAULT_SCALING) -> OptimizationResult:
    """Power split for ``r_min``, then the error-minimizing threshold."""
    split = solve_power_split(r_min, config)
    rho_c = split.rho_c if split.feasible else 0.0
    cfg = config.replace(rho_c=rho_c)
    thr = solve_threshold(rho_c, cfg, scaling)
    if thr.degenerate:
        report = ConvexityReport(thr.tau, 0.0, 0.0, 0.0, False, "flat objective")
    else:
        report = verify_convexity(rho_c, thr.tau, cfg, scaling)
    point = detection_point(thr.tau, derive(cfg), cfg, scaling)
    rate = ergodic_rate(rho_c, cfg).rate_bps_hz if split.feasible else 0.0
    return OptimizationResult(
        rho_c_star=rho_c,
        tau_star=thr.tau,
        p_e_star=thr.p_e,
        achieved_rate=rate,
        feasible=split.feasible,
        convexity_ok=report.ok,
        iterations=thr.iterations,
        p_f_star=point.p_f,
        p_md_star=point.p_md,
        convexity=report,
    )


def cfar_baseline(rho_c: float, config: SystemConfig, alpha: float = 0.1, scaling=DEFAULT_SCALING) -> DetectionPoint:
    """Operating point of the fixed-false-alarm detector at the same split."""
    cfg = config.replace(rho_c=rho_c)
    tau = cfar_threshold(alpha, cfg, scaling)
    return detection_point(tau, derive(cfg), cfg, scaling)
