"""Scalar Gaussian primitives shared by every other module.

All functions accept a float or a numpy array and return the same shape
(a plain float for scalar input). They are pure and thread-safe.
"""
import math

import numpy as np
from scipy import special

from utils import DomainError, require_finite

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_SQRT2 = math.sqrt(2.0)


def _out(x, value):
    if np.ndim(x) == 0:
        return float(value)
    return value


def std_normal_pdf(x):
    """phi(x) = exp(-x^2/2) / sqrt(2 pi)."""
    require_finite('x', x)
    x = np.asarray(x, dtype=float)
    return _out(x, np.exp(-0.5 * x * x) / SQRT_2PI)


def log_std_normal_pdf(x):
    require_finite('x', x)
    x = np.asarray(x, dtype=float)
    return _out(x, -0.5 * x * x - LOG_SQRT_2PI)


def _lower_tail(x):
    """Phi(x) for x <= 0 as erfcx(-x/sqrt2) exp(-x^2/2) / 2.

    x^2 is carried as sq + err (Dekker split) so the exponent is exact.
    """
    t = np.clip(x, -40.0, 0.0)
    sq = t * t
    hi = t * 134217729.0
    hi = hi - (hi - t)
    lo = t - hi
    err = ((hi * hi - sq) + 2.0 * hi * lo) + lo * lo
    return 0.5 * special.erfcx(-t / _SQRT2) * np.exp(-0.5 * sq) * (1.0 - 0.5 * err)


def std_normal_cdf(x):
    """Phi(x), accurate to a few ulps in both tails."""
    require_finite('x', x)
    x = np.asarray(x, dtype=float)
    return _out(x, np.where(x < 0.0, _lower_tail(x), 0.5 * special.erfc(-x / _SQRT2)))


def std_normal_sf(x):
    """1 - Phi(x) without cancellation."""
    require_finite('x', x)
    x = np.asarray(x, dtype=float)
    return _out(x, np.where(x > 0.0, _lower_tail(-x), 0.5 * special.erfc(x / _SQRT2)))


def log_std_normal_cdf(x):
    """log Phi(x); finite down to x = -1e150 or so."""
    require_finite('x', x)
    x = np.asarray(x, dtype=float)
    return _out(x, special.log_ndtr(x))


def log_std_normal_sf(x):
    """log(1 - Phi(x))."""
    require_finite('x', x)
    x = np.asarray(x, dtype=float)
    return _out(x, special.log_ndtr(-x))


def mills_ratio(x):
    """phi(x) / Phi(x), stable for x << 0 where both factors underflow."""
    require_finite('x', x)
    x = np.asarray(x, dtype=float)
    return _out(x, np.exp(-0.5 * x * x - LOG_SQRT_2PI - special.log_ndtr(x)))


def std_normal_quantile(v):
    """Inverse of Phi on (0, 1).

    Starts from scipy's rational approximation and applies two Newton steps;
    the upper half is polished against the survival function so the residual
    keeps full relative precision.
    """
    arr = np.asarray(v, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"quantile argument must lie in (0, 1), got {v!r}")
    if np.any(arr == 0.0) or np.any(arr == 1.0):
        raise DomainError(f"quantile of 0 or 1 is infinite, got {v!r}")

    upper = arr > 0.5
    tail = np.where(upper, 1.0 - arr, arr)
    x = special.ndtri(arr)
    for _ in range(2):
        density = np.exp(-0.5 * x * x) / SQRT_2PI
        residual = np.where(
            upper,
            tail - 0.5 * special.erfc(x / _SQRT2),
            0.5 * special.erfc(-x / _SQRT2) - tail,
        )
        x = x - residual / density
    return _out(arr, x)


def gaussian_isoperimetric_profile(v):
    """I_gamma(v) = phi(Phi^{-1}(v)) on [0, 1], zero at the endpoints."""
    arr = np.asarray(v, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"volume must lie in [0, 1], got {v!r}")
    interior = (arr > 0.0) & (arr < 1.0)
    safe = np.where(interior, arr, 0.5)
    values = np.where(interior, std_normal_pdf(std_normal_quantile(safe)), 0.0)
    return _out(arr, values)
