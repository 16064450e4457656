"""Scalar special functions and series building blocks.

Everything here works with integer orders only: the detection and capacity
formulas never need a non-integer incomplete gamma. The array-valued helpers
(``regularized_lower_gamma``, ``exp_moments``, ``c_series_batch``) are the
ones the detection module calls on whole threshold grids; the scalar
wrappers keep the small public surface convenient for tests and notebooks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SeriesControl",
    "ConvergenceError",
    "neumaier_sum",
    "regularized_lower_gamma",
    "lower_incomplete_gamma",
    "exponential_integral_e1",
    "exponential_integral_en_scaled",
    "upper_incomplete_gamma_int",
    "j_function",
    "exp_moments",
    "hyp0f1",
    "c_series",
    "c_series_batch",
    "c_series_scaled",
    "b_factor",
]

_EULER_GAMMA = 0.5772156649015328606
_EPS = np.finfo(float).eps


class ConvergenceError(ArithmeticError):
    """Raised when an infinite series does not settle within its term budget."""

    def __init__(self, message: str, last_ratio: float):
        super().__init__(f"{message} (last |term/sum| = {last_ratio:.3e})")
        self.last_ratio = last_ratio


@dataclass(frozen=True)
class SeriesControl:
    rel_tolerance: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not (0.0 < self.rel_tolerance < 1e-3):
            raise ValueError("rel_tolerance must lie in (0, 1e-3)")
        if self.max_terms < 10:
            raise ValueError("max_terms must be at least 10")


DEFAULT_CONTROL = SeriesControl()


def neumaier_sum(terms):
    """Compensated sum over the leading axis of ``terms``.

    Works elementwise on arrays, which is what the CDF code needs; for plain
    Python scalars ``math.fsum`` is used instead.
    """
    terms = list(terms)
    if not terms:
        return 0.0
    if all(np.ndim(t) == 0 for t in terms):
        return math.fsum(float(t) for t in terms)
    total = np.zeros(np.broadcast(*terms).shape)
    comp = np.zeros_like(total)
    for t in terms:
        t = np.asarray(t, dtype=float)
        s = total + t
        big = np.abs(total) >= np.abs(t)
        comp += np.where(big, (total - s) + t, (t - s) + total)
        total = s
    return total + comp


def _check_order(n):
    if int(n) != n or n < 1:
        raise ValueError(f"order must be a positive integer, got {n!r}")
    return int(n)


def regularized_lower_gamma(n: int, x):
    """P(n, x) = gamma(n, x) / (n-1)! for integer ``n >= 1`` and ``x >= 0``.

    Power series below ``x = n``, Poisson-tail complement above; both
    branches are sums of positive terms.
    """
    n = _check_order(n)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("regularized_lower_gamma expects x >= 0")
    out = np.zeros_like(x)
    lo = (x > 0) & (x < n)
    hi = x >= n
    if np.any(lo):
        xl = x[lo]
        term = np.ones_like(xl)
        acc = np.ones_like(xl)
        k = 1
        while True:
            term = term * xl / (n + k)
            acc += term
            if np.all(term <= _EPS * acc) or k > 2000:
                break
            k += 1
        out[lo] = np.exp(n * np.log(xl) - xl - math.lgamma(n + 1)) * acc
    if np.any(hi):
        xh = x[hi]
        logx = np.log(xh)
        tail = np.zeros_like(xh)
        for k in range(n):
            tail += np.exp(k * logx - xh - math.lgamma(k + 1))
        out[hi] = 1.0 - tail
    return out if out.ndim else float(out)


def lower_incomplete_gamma(n: int, x: float) -> float:
    """Lower incomplete gamma for integer order, continued to negative ``x``.

    gamma(n, x) = (n-1)! (1 - e^{-x} sum_{k<n} x^k / k!) holds for every real
    ``x``. For ``x < 0`` that finite form cancels badly, so the equivalent
    positive series x^n sum_j |x|^j / (j! (n + j)) is summed instead.
    """
    n = _check_order(n)
    x = float(x)
    if x == 0.0:
        return 0.0
    if x > 0:
        return math.exp(math.lgamma(n)) * regularized_lower_gamma(n, x)
    return x**n * float(exp_moments(np.array([x]), n - 1)[0, n - 1])


def exponential_integral_e1(x: float) -> float:
    """E1(x) = int_x^inf e^{-t}/t dt for x > 0."""
    if x <= 0:
        raise ValueError("E1 is defined here for x > 0 only")
    return math.exp(-x) * exponential_integral_en_scaled(1, x)


def exponential_integral_en_scaled(n: int, x: float) -> float:
    """e^x * E_n(x) for integer n >= 1 and x > 0.

    Series below x = 1, Lentz continued fraction above. The scaling keeps
    the value finite for large ``x`` where E_n itself underflows.
    """
    n = _check_order(n)
    if x <= 0:
        raise ValueError("E_n is defined here for x > 0 only")
    if x > 1.0:
        tiny = 1e-300
        b = x + n
        c = 1.0 / tiny
        d = 1.0 / b
        h = d
        for i in range(1, 10_000):
            an = -i * (n - 1 + i)
            b += 2.0
            d = 1.0 / (an * d + b)
            c = b + an / c
            delta = c * d
            h *= delta
            if abs(delta - 1.0) < 1e-16:
                return h
        raise ConvergenceError("E_n continued fraction did not converge", abs(delta - 1.0))
    # series with the digamma correction term
    nm1 = n - 1
    ans = (1.0 / nm1) if nm1 else (-math.log(x) - _EULER_GAMMA)
    fact = 1.0
    for i in range(1, 10_000):
        fact *= -x / i
        if i != nm1:
            delta = -fact / (i - nm1)
        else:
            psi = -_EULER_GAMMA + math.fsum(1.0 / k for k in range(1, nm1 + 1))
            delta = fact * (-math.log(x) + psi)
        ans += delta
        if abs(delta) < abs(ans) * 1e-17:
            return math.exp(x) * ans
    raise ConvergenceError("E_n series did not converge", abs(delta / ans))


def upper_incomplete_gamma_int(a: int, x: float) -> float:
    """Gamma(a, x) for any integer ``a`` and ``x > 0``.

    a >= 1 uses the finite sum, a = 0 is E1. For a < 0 the downward
    recurrence Gamma(a, x) = (Gamma(a+1, x) - x^a e^{-x}) / a is used when
    x <= 1; above that it loses a digit per step, so the identity
    Gamma(-m, x) = x^{-m} E_{m+1}(x) takes over.
    """
    if int(a) != a:
        raise ValueError("order must be an integer")
    a = int(a)
    if x <= 0:
        raise ValueError("upper incomplete gamma needs x > 0")
    if a >= 1:
        terms = [math.exp(k * math.log(x) - x - math.lgamma(k + 1)) for k in range(a)]
        return math.factorial(a - 1) * math.fsum(terms)
    if a == 0:
        return exponential_integral_e1(x)
    if x > 1.0:
        m = -a
        return math.exp(-x - m * math.log(x)) * exponential_integral_en_scaled(m + 1, x)
    val = exponential_integral_e1(x)
    for order in range(-1, a - 1, -1):
        val = (val - x**order * math.exp(-x)) / order
    return val


def j_function(n: int, mu: float) -> float:
    """J_n(mu) = (n-1)! e^mu sum_{k=1}^n Gamma(k-n, mu) mu^{n-k}.

    Each summand equals e^mu E_{n-k+1}(mu), so the whole thing is a sum of
    positive scaled exponential integrals; no exp(mu) is ever formed.
    Equivalently J_n(mu) = int_0^inf ln(1 + t/mu) t^{n-1} e^{-t} dt.
    """
    n = _check_order(n)
    if not mu > 0:
        raise ValueError("mu must be positive")
    terms = [exponential_integral_en_scaled(m, mu) for m in range(1, n + 1)]
    return math.factorial(n - 1) * math.fsum(terms)


def exp_moments(z, jmax: int) -> np.ndarray:
    """m_j(z) = int_0^1 x^j e^{-z x} dx for j = 0..jmax, one row per z.

    Equal to gamma(j+1, z) / z^{j+1} for z != 0. For z >= 0 the start value
    at ``jmax`` comes from a positive series (or the closed form when z is
    large) and the rest from the downward recurrence
    m_{j-1} = (z m_j + e^{-z}) / j, which only adds positive numbers. For
    z < 0 every m_j is the positive series sum_i w^i / (i! (j + 1 + i)),
    w = -z, evaluated as one matrix product.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty((z.size, jmax + 1))
    pos = z >= 0
    if np.any(pos):
        zp = z[pos]
        ez = np.exp(-zp)
        start = np.empty_like(zp)
        small = zp <= jmax + 1
        if np.any(small):
            zs = zp[small]
            term = np.full_like(zs, 1.0 / (jmax + 1))
            acc = term.copy()
            i = 1
            while True:
                term = term * zs / (jmax + 1 + i)
                acc += term
                if np.all(term <= _EPS * acc) or i > 5000:
                    break
                i += 1
            start[small] = ez[small] * acc
        if np.any(~small):
            zl = zp[~small]
            start[~small] = np.exp(math.lgamma(jmax + 1) - (jmax + 1) * np.log(zl)) * regularized_lower_gamma(
                jmax + 1, zl
            )
        rows = np.empty((zp.size, jmax + 1))
        rows[:, jmax] = start
        for j in range(jmax, 0, -1):
            rows[:, j - 1] = (zp * rows[:, j] + ez) / j
        out[pos] = rows
    if np.any(~pos):
        w = -z[~pos]
        if np.any(w > 700):
            raise OverflowError("exp_moments: |z| too large for the negative branch")
        nterms = int(np.max(w) + 12.0 * math.sqrt(np.max(w) + 1.0) + 40)
        i = np.arange(nterms)
        # w^i / i! for each row, built in log space
        logp = np.outer(np.log(np.where(w > 0, w, 1.0)), i) - np.array([math.lgamma(k + 1) for k in i])
        p = np.exp(logp)
        p[w == 0, 1:] = 0.0
        kernel = 1.0 / (i[:, None] + np.arange(jmax + 1)[None, :] + 1.0)
        out[~pos] = p @ kernel
    return out


def hyp0f1(b: float, z: float) -> float:
    """Scalar 0F1(; b; z) by direct summation (z >= 0 in practice)."""
    term = 1.0
    acc = 1.0
    for ell in range(1, 10_000):
        term *= z / ((b + ell - 1) * ell)
        acc += term
        if abs(term) <= 1e-17 * abs(acc):
            return acc
    raise ConvergenceError("0F1 series did not converge", abs(term / acc))


def c_series_scaled(ks, s: float, c: float, t, n_samples: int, ctl: SeriesControl = DEFAULT_CONTROL):
    """C_k(s, c, t) for every k in ``ks`` and t in ``t``, as (mantissa, log_shift).

    C_k(s, c, t) = sum_l (c t)^l / ((K)_l l!) * m_{k+l}(s t), with K the
    sample count; the true value is ``mantissa * exp(log_shift)``. The shift
    is the largest log-weight per t, which keeps strongly non-central cases
    (c t in the thousands) finite. Each (k, t) entry stops once two
    consecutive terms fall below ``rel_tolerance`` times the running sum.
    Shapes: mantissa (len(ks), len(t)), log_shift (len(t),).
    """
    if s == 0:
        raise ValueError("s must be nonzero")
    if c < 0:
        raise ValueError("c must be nonnegative")
    ks = np.atleast_1d(np.asarray(ks, dtype=int))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    K = int(n_samples)
    z = s * t
    x = c * t
    budget = 64
    while True:
        nterms = min(budget, ctl.max_terms)
        m = exp_moments(z, int(ks.max()) + nterms)
        ell = np.arange(1, nterms)
        steps = np.log(ell * (K + ell - 1.0))
        with np.errstate(divide="ignore"):
            logx = np.log(x)
        logw = np.zeros((nterms, t.size))
        if nterms > 1:
            logw[1:] = np.cumsum(logx[None, :] - steps[:, None], axis=0)
        logw[1:, x == 0] = -np.inf
        shift = logw.max(axis=0)
        weights = np.exp(logw - shift)
        total = np.zeros((ks.size, t.size))
        comp = np.zeros_like(total)
        quiet = np.zeros(total.shape, dtype=int)
        done = np.zeros(total.shape, dtype=bool)
        ratio = np.zeros(total.shape)
        for i in range(nterms):
            term = weights[i][None, :] * m[:, ks + i].T
            term = np.where(done, 0.0, term)
            s_new = total + term
            comp += np.where(np.abs(total) >= np.abs(term), (total - s_new) + term, (term - s_new) + total)
            total = s_new
            ratio = np.abs(term) / np.maximum(np.abs(total), np.finfo(float).tiny)
            quiet = np.where((ratio < ctl.rel_tolerance) & (total != 0), quiet + 1, 0)
            done |= quiet >= 2
            if done.all():
                return total + comp, shift
        if nterms >= ctl.max_terms:
            raise ConvergenceError(
                f"C_k series did not converge within {ctl.max_terms} terms", float(np.max(ratio[~done]))
            )
        budget *= 2


def c_series_batch(ks, s: float, c: float, t, n_samples: int, ctl: SeriesControl = DEFAULT_CONTROL) -> np.ndarray:
    """Unscaled C_k values, shape (len(ks), len(t))."""
    mant, shift = c_series_scaled(ks, s, c, t, n_samples, ctl)
    return mant * np.exp(shift)[None, :]


def c_series(k: int, s: float, c: float, t: float, n_samples: int, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Scalar C_k(s, c, t) = int_0^1 e^{-s t x} x^k 0F1(K; c t x) dx."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return float(c_series_batch([k], s, c, [t], n_samples, ctl)[0, 0])


def b_factor(tau, K: int, sigma_s2: float):
    """B_K(tau) = gamma(K, u) / u^K with u = tau / sigma_s2.

    Evaluated through the regularized gamma rather than the two-sum form,
    which cancels catastrophically for small u.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    u = tau / sigma_s2
    val = np.exp(math.lgamma(K) - K * np.log(u)) * regularized_lower_gamma(K, u)
    return val if val.ndim else float(val)
