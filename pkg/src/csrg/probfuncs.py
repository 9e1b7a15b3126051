"""Scalar probability functions used by the constraint tightening.

Self-contained on purpose: the tightening magnitudes feed directly into the
admissible-set geometry, so every inverse here is Newton-refined against its
own forward function instead of trusting a polynomial fit. The common kernel
is the regularized lower incomplete gamma P(a, x) (series for x < a+1,
Lentz continued fraction otherwise), which also supplies erf and the
chi-square CDF.
"""

from __future__ import annotations

import math
import warnings

from .errors import DomainError

_SQRT_PI = math.sqrt(math.pi)
_P_CLAMP = 1e-15


def _gammp(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x), a > 0, x >= 0."""
    if x < 0.0 or a <= 0.0:
        raise DomainError(f"gammp domain: a={a}, x={x}")
    if x == 0.0:
        return 0.0
    lg = math.lgamma(a)
    if x < a + 1.0:
        ap = a
        summ = 1.0 / a
        delta = summ
        for _ in range(1000):
            ap += 1.0
            delta *= x / ap
            summ += delta
            if abs(delta) < abs(summ) * 1e-17:
                break
        return summ * math.exp(-x + a * math.log(x) - lg)
    # continued fraction for the upper tail Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        factor = d * c
        h *= factor
        if abs(factor - 1.0) < 1e-17:
            break
    q = math.exp(-x + a * math.log(x) - lg) * h
    return 1.0 - q


def erf(x: float) -> float:
    """Error function via P(1/2, x^2); odd, saturates to +-1 by |x| ~ 6."""
    if not math.isfinite(x):
        raise DomainError("erf requires finite x")
    if x == 0.0:
        return 0.0
    if abs(x) >= 6.5:
        return math.copysign(1.0, x)
    return math.copysign(_gammp(0.5, x * x), x)


def _erf_deriv(x: float) -> float:
    return 2.0 / _SQRT_PI * math.exp(-x * x)


def _norm_quantile_guess(p: float) -> float:
    """Rational approximation of the standard normal quantile (|err| < 2e-9)."""
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > p_high:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def erf_inv(p: float) -> float:
    """Inverse error function: rational initial guess plus Newton refinement."""
    if not (-1.0 < p < 1.0):
        raise DomainError(f"erf_inv requires |p| < 1, got {p}")
    if p == 0.0:
        return 0.0
    x = _norm_quantile_guess(0.5 * (p + 1.0)) / math.sqrt(2.0)
    for _ in range(4):
        deriv = _erf_deriv(x)
        if deriv <= 0.0:
            break
        x -= (erf(x) - p) / deriv
    return x


def normal_cdf(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * (1.0 + erf(z / math.sqrt(2.0)))


def _clamp_probability(p: float, name: str) -> float:
    if not (0.0 < p < 1.0):
        raise DomainError(f"{name} requires p in (0, 1), got {p}")
    if p < _P_CLAMP or p > 1.0 - _P_CLAMP:
        warnings.warn(f"{name}: p={p} clamped to [{_P_CLAMP}, 1-{_P_CLAMP}]",
                      RuntimeWarning, stacklevel=3)
        return min(max(p, _P_CLAMP), 1.0 - _P_CLAMP)
    return p


def normal_quantile(p: float) -> float:
    """Standard normal quantile, inverse of normal_cdf."""
    p = _clamp_probability(p, "normal_quantile")
    return math.sqrt(2.0) * erf_inv(2.0 * p - 1.0)


def chi2_cdf(x: float, n: int) -> float:
    """Chi-square CDF with n degrees of freedom."""
    if n < 1:
        raise DomainError(f"chi2_cdf requires n >= 1, got {n}")
    if x <= 0.0:
        return 0.0
    return _gammp(0.5 * n, 0.5 * x)


def chi2_inv(p: float, n: int) -> float:
    """Chi-square quantile: Wilson-Hilferty initial guess plus Newton."""
    if n < 1:
        raise DomainError(f"chi2_inv requires n >= 1, got {n}")
    p = _clamp_probability(p, "chi2_inv")
    z = normal_quantile(p)
    t = 2.0 / (9.0 * n)
    x = n * (1.0 - t + z * math.sqrt(t)) ** 3
    if x <= 0.0:
        x = 1e-8
    log_norm = -0.5 * n * math.log(2.0) - math.lgamma(0.5 * n)
    for _ in range(100):
        f = chi2_cdf(x, n) - p
        pdf = math.exp((0.5 * n - 1.0) * math.log(x) - 0.5 * x + log_norm)
        if pdf <= 0.0:
            break
        step = f / pdf
        # keep the iterate positive; damp huge steps
        if step > x:
            step = 0.9 * x
        x -= step
        if abs(step) <= 1e-13 * max(x, 1.0):
            break
    return x
