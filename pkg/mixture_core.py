"""Reduction of the n-dimensional two-component mixture to its 1D canonical form.

The canonical problem puts weight m = min(p, 1-p) <= 1/2 on a standard
Gaussian at 0 and weight 1 - m on a standard Gaussian at d > 0. Every
derived scalar function is evaluated by MixtureFunctions.
"""
import math
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from special_fn import LOG_SQRT_2PI, SQRT_2PI
from utils import DomainError, require_finite

DEGENERACY_SCALE = 1e-14
LOG_DOUBLE_MAX = math.log(np.finfo(float).max)
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MixtureSpec:
    """mu = p gamma(. - a) + (1 - p) gamma(. - b) on R^n."""
    p: float
    a: tuple
    b: tuple

    def __post_init__(self):
        require_finite('p', self.p)
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"weight p must lie in [0, 1], got {self.p}")
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        b = tuple(float(v) for v in np.atleast_1d(self.b))
        require_finite('a', a)
        require_finite('b', b)
        if len(a) != len(b) or not a:
            raise DomainError(f"centres must share a positive dimension, got {len(a)} and {len(b)}")
        if not (np.isfinite(np.linalg.norm(a)) and np.isfinite(np.linalg.norm(b))):
            raise DomainError("centre norms overflow")
        object.__setattr__(self, 'p', float(self.p))
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)

    @classmethod
    def from_canonical(cls, m, d, n=1):
        """Spec with a = 0, b = d e_1 and p = m."""
        b = np.zeros(n)
        b[0] = d
        return cls(p=m, a=np.zeros(n), b=b)

    @property
    def n(self):
        return len(self.a)

    @property
    def a_vec(self):
        return np.asarray(self.a)

    @property
    def b_vec(self):
        return np.asarray(self.b)

    @property
    def distance(self):
        return float(np.linalg.norm(self.b_vec - self.a_vec))

    @property
    def is_degenerate(self):
        scale = 1.0 + np.linalg.norm(self.a_vec) + np.linalg.norm(self.b_vec)
        return self.p in (0.0, 1.0) or self.distance <= DEGENERACY_SCALE * scale

    def to_dict(self):
        return {'p': self.p, 'a': list(self.a), 'b': list(self.b), 'n': self.n}


@dataclass(frozen=True)
class DegenerateGaussian:
    """Marker for mixtures that reduce to a single translated standard Gaussian."""
    center: tuple

    @property
    def n(self):
        return len(self.center)


class MixtureFunctions:
    """Q = m Phi(x) + (1-m) Phi(x-d) and the functions derived from it.

    Methods accept floats or numpy arrays. Log-space forms are used wherever
    the direct expression could underflow or overflow.
    """

    def __init__(self, m, d):
        self.m = float(m)
        self.d = float(d)
        self.q_weight = 1.0 - self.m
        with np.errstate(divide='ignore'):
            self._log_m = np.log(self.m)
            self._log_q = np.log(self.q_weight)
        self._log_odds = self._log_q - self._log_m

    def __repr__(self):
        return f"MixtureFunctions(m={self.m!r}, d={self.d!r})"

    def Q(self, r):
        r = np.asarray(r, dtype=float)
        return (self.m * 0.5 * special.erfc(-r / _SQRT2)
                + self.q_weight * 0.5 * special.erfc(-(r - self.d) / _SQRT2))

    def sf(self, r):
        """1 - Q(r) without cancellation."""
        r = np.asarray(r, dtype=float)
        return (self.m * 0.5 * special.erfc(r / _SQRT2)
                + self.q_weight * 0.5 * special.erfc((r - self.d) / _SQRT2))

    def log_Q(self, r):
        r = np.asarray(r, dtype=float)
        return np.logaddexp(self._log_m + special.log_ndtr(r),
                            self._log_q + special.log_ndtr(r - self.d))

    def dQ(self, r):
        r = np.asarray(r, dtype=float)
        return (self.m * np.exp(-0.5 * r * r)
                + self.q_weight * np.exp(-0.5 * (r - self.d) ** 2)) / SQRT_2PI

    def log_dQ(self, r):
        r = np.asarray(r, dtype=float)
        return np.logaddexp(self._log_m - 0.5 * r * r,
                            self._log_q - 0.5 * (r - self.d) ** 2) - LOG_SQRT_2PI

    def d2Q(self, r):
        r = np.asarray(r, dtype=float)
        second = self.q_weight * np.exp(-0.5 * (r - self.d) ** 2) / SQRT_2PI
        return -r * self.dQ(r) + self.d * second

    def log_k(self, r):
        r = np.asarray(r, dtype=float)
        return self.d * r - 0.5 * self.d * self.d

    def k(self, r):
        # saturates instead of overflowing
        return np.exp(np.minimum(self.log_k(r), LOG_DOUBLE_MAX))

    def weights(self, r):
        """Shares (w0, w1) of the two components in Q'(r)."""
        z = self._log_odds + self.log_k(r)
        return special.expit(-z), special.expit(z)

    def log_f(self, r):
        """log Q' - log Q; finite where f itself underflows."""
        return self.log_dQ(r) - self.log_Q(r)

    def f(self, r):
        """(log Q)' = Q'/Q, the perpendicular half-space Cheeger ratio."""
        return np.exp(self.log_f(r))

    def h(self, r):
        """Q''/Q' = -r + d w1(r)."""
        r = np.asarray(r, dtype=float)
        _, w1 = self.weights(r)
        return -r + self.d * w1

    def F(self, r):
        """Q' - Q h = Q (f - h); shares its zeros with f' and has the opposite sign."""
        r = np.asarray(r, dtype=float)
        return self.dQ(r) - self.Q(r) * self.h(r)

    def h_prime(self, r):
        w0, w1 = self.weights(r)
        return -1.0 + self.d * self.d * w0 * w1

    def S(self, u):
        u = np.asarray(u, dtype=float)
        return u / (self.m + self.q_weight * u) ** 2

    def S_prime(self, u):
        u = np.asarray(u, dtype=float)
        return (self.m - self.q_weight * u) / (self.m + self.q_weight * u) ** 3

    @property
    def x0(self):
        """Point where k(x0) = m/(1-m); h' peaks there at -1 + d^2/4."""
        return (-self._log_odds + 0.5 * self.d * self.d) / self.d

    def h_prime_zeros(self):
        """Zeros (alpha, beta) of h' from the quadratic in k, or None when d < 2.

        q^2 k^2 + (2mq - mq d^2) k + m^2 = 0; d = 2 gives the double root x0.
        """
        d, m, q = self.d, self.m, self.q_weight
        if d < 2.0:
            return None
        disc = (m * q) ** 2 * d * d * (d * d - 4.0)
        if disc <= 0.0:
            return self.x0, self.x0
        a_coef = q * q
        b_coef = m * q * (2.0 - d * d)
        log_k_hi = math.log((-b_coef + math.sqrt(disc)) / (2.0 * a_coef))
        log_k_lo = 2.0 * self._log_m - 2.0 * self._log_q - log_k_hi
        alpha = (log_k_lo + 0.5 * d * d) / d
        beta = (log_k_hi + 0.5 * d * d) / d
        return float(alpha), float(beta)


@dataclass(frozen=True)
class CanonicalMixture:
    """Reduced 1D problem (m, d) plus the rigid motion back to R^n.

    Half-spaces of the original problem are {x . nu < offset + t} and
    {x . nu > offset + t}.
    """
    m: float
    d: float
    nu: tuple = (1.0,)
    offset: float = 0.0
    reflected: bool = False

    def __post_init__(self):
        require_finite('m', self.m)
        require_finite('d', self.d)
        if not 0.0 < self.m <= 0.5:
            raise DomainError(f"canonical weight m must lie in (0, 1/2], got {self.m}")
        if not self.d > 0.0:
            raise DomainError(f"canonical distance d must be positive, got {self.d}")
        nu = tuple(float(v) for v in self.nu)
        if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
            raise DomainError(f"nu must be a unit vector, got {nu}")
        object.__setattr__(self, 'm', float(self.m))
        object.__setattr__(self, 'd', float(self.d))
        object.__setattr__(self, 'nu', nu)
        object.__setattr__(self, 'offset', float(self.offset))

    @classmethod
    def from_md(cls, m, d):
        return cls(m=m, d=d)

    @property
    def n(self):
        return len(self.nu)

    @cached_property
    def functions(self):
        return MixtureFunctions(self.m, self.d)


def canonicalize(spec):
    """Map a MixtureSpec to a CanonicalMixture, or DegenerateGaussian when mu is a single Gaussian."""
    if spec.is_degenerate:
        if spec.p == 0.0:
            center = spec.b
        else:
            center = spec.a
        logging.debug(f"Degenerate mixture p={spec.p}, |a-b|={spec.distance}")
        return DegenerateGaussian(center=center)

    diff = spec.b_vec - spec.a_vec
    d = float(np.linalg.norm(diff))
    nu = diff / d
    if spec.p > 0.5:
        return CanonicalMixture(m=1.0 - spec.p, d=d, nu=tuple(-nu),
                                offset=float(-spec.b_vec @ nu), reflected=True)
    return CanonicalMixture(m=spec.p, d=d, nu=tuple(nu),
                            offset=float(spec.a_vec @ nu), reflected=False)


def _functions(cm):
    return cm if isinstance(cm, MixtureFunctions) else cm.functions


def _checked(r):
    require_finite('r', r)
    return r


def mixture_cdf(cm, r):
    """mu(H_r^-) = m Phi(r) + (1-m) Phi(r-d)."""
    return _functions(cm).Q(_checked(r))


def mixture_sf(cm, r):
    """mu(H_r^+) = 1 - Q(r)."""
    return _functions(cm).sf(_checked(r))


def mixture_perimeter(cm, r):
    """mu_+(H_r^-) = mu_+(H_r^+) = Q'(r)."""
    return _functions(cm).dQ(_checked(r))


def log_ratio_f(cm, r):
    return _functions(cm).f(_checked(r))


def log_f_value(cm, r):
    return _functions(cm).log_f(_checked(r))


def hazard_h(cm, r):
    return _functions(cm).h(_checked(r))


def F_value(cm, r):
    return _functions(cm).F(_checked(r))


def log_k_value(cm, r):
    return _functions(cm).log_k(_checked(r))


def k_value(cm, r):
    return _functions(cm).k(_checked(r))


def h_prime(cm, r):
    return _functions(cm).h_prime(_checked(r))


def h_prime_zeros(cm):
    return _functions(cm).h_prime_zeros()
