"""Largest-eigenvalue detection for integrated sensing and communication.

Closed-form detection and rate expressions, a reproducible Monte Carlo
sampler to check them against, and the two-step power/threshold design.
"""

from .capacity import ergodic_rate, ergodic_rate_mc, rate_inverse
from .detection import cdf_h0, cdf_h1, cfar_threshold, pd, pf, total_error
from .montecarlo import Hypothesis, Scaling, run_batch
from .optimizer import joint_solve, solve_threshold
from .system_model import SystemConfig, derive, load_config

__version__ = "0.1.0"

__all__ = [
    "SystemConfig",
    "derive",
    "load_config",
    "Hypothesis",
    "Scaling",
    "run_batch",
    "cdf_h0",
    "cdf_h1",
    "pf",
    "pd",
    "total_error",
    "cfar_threshold",
    "ergodic_rate",
    "ergodic_rate_mc",
    "rate_inverse",
    "solve_threshold",
    "joint_solve",
]
