"""Cheeger constant and Cheeger sets of two-component Gaussian mixtures.

The Cheeger constant is the minimum of f = (log Q)' over [0, r*], where
Q(r*) = 1/2. Critical points of f are the zeros of F = Q' - Q h, which
has at most two zeros; they are bracketed between the closed-form zeros
of h'. The optimal sets are the half-spaces perpendicular to b - a at the
minimizing offsets.
"""
import math
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from mixture_core import CanonicalMixture, DegenerateGaussian, canonicalize
from special_fn import SQRT_2_OVER_PI, SQRT_2PI, mills_ratio, std_normal_cdf
from utils import DegenerateMixtureError, DomainError, config_manager

TIE_TOLERANCE = config_manager.get('solver.tie_tolerance', 1e-9)
DEDUP_SPACING = config_manager.get('solver.dedup_spacing', 1e-8)
ROOT_XTOL = config_manager.get('solver.root_xtol', 1e-12)
PROFILE_BRACKET = 10.0
MINUS, PLUS = 'minus', 'plus'
_RTOL = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class HalfSpace:
    """H^- = {x . nu < c} (side='minus') or H^+ = {x . nu > c} (side='plus')."""
    nu: tuple
    c: float
    side: str = MINUS

    def __post_init__(self):
        nu = tuple(float(v) for v in np.atleast_1d(self.nu))
        if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
            raise DomainError(f"half-space normal must be a unit vector, got {nu}")
        if not math.isfinite(self.c):
            raise DomainError(f"half-space offset must be finite, got {self.c}")
        if self.side not in (MINUS, PLUS):
            raise DomainError(f"side must be '{MINUS}' or '{PLUS}', got {self.side!r}")
        object.__setattr__(self, 'nu', nu)
        object.__setattr__(self, 'c', float(self.c))

    @property
    def n(self):
        return len(self.nu)

    def projection(self, points):
        return np.asarray(points, dtype=float) @ np.asarray(self.nu)

    def contains(self, points):
        s = self.projection(points)
        return s < self.c if self.side == MINUS else s > self.c

    def outer_distance(self, points):
        """Euclidean distance to the set; zero inside."""
        s = self.projection(points)
        gap = s - self.c if self.side == MINUS else self.c - s
        return np.maximum(gap, 0.0)

    def complement(self):
        return HalfSpace(self.nu, self.c, PLUS if self.side == MINUS else MINUS)

    def to_dict(self):
        return {'kind': 'halfspace', 'nu': list(self.nu), 'c': self.c, 'side': self.side}


@dataclass
class CheegerSolution:
    h: float
    r_star: float
    minimizers: list
    halfspaces: list
    unique: bool
    degenerate_gaussian: bool = False
    m: float = None
    d: float = None
    gap: float = math.inf
    log_h: float = None

    def to_dict(self):
        return {
            'h': self.h,
            'log_h': self.log_h,
            'r_star': self.r_star,
            'minimizers': list(self.minimizers),
            'halfspaces': [hs.to_dict() for hs in self.halfspaces],
            'unique': self.unique,
            'degenerate_gaussian': self.degenerate_gaussian,
            'm': self.m,
            'd': self.d,
            'gap': self.gap,
        }


@dataclass(frozen=True)
class ProfilePoint:
    v: float
    iso: float
    r: float


@dataclass
class MinimizerSearch:
    """Full outcome of the candidate enumeration behind find_minimizers."""
    h: float
    r_star: float
    minimizers: list
    candidates: list = field(default_factory=list)
    local_minima: list = field(default_factory=list)
    gap: float = math.inf
    log_h: float = None


def _require_canonical(cm):
    if isinstance(cm, DegenerateGaussian) or not isinstance(cm, CanonicalMixture):
        raise DegenerateMixtureError(
            "mixture is a single Gaussian; use cheeger() which handles it in closed form")
    return cm.functions


def cheeger_ratio(volume, perimeter):
    """mu_+(A) / min(mu(A), 1 - mu(A))."""
    volume = np.asarray(volume, dtype=float)
    return perimeter / np.minimum(volume, 1.0 - volume)


def median_r_star(cm):
    """r* with Q(r*) = 1/2; lies in [d/2, d)."""
    fn = _require_canonical(cm)
    d = fn.d
    if fn.m == 0.5:
        return 0.5 * d

    def excess(r):
        return float(fn.Q(r)) - 0.5

    lo, hi = 0.5 * d, d
    if excess(lo) >= 0.0:
        return lo
    r = brentq(excess, lo, hi, xtol=1e-15, rtol=_RTOL, maxiter=300)
    for _ in range(2):
        candidate = r - excess(r) / float(fn.dQ(r))
        if lo <= candidate <= hi:
            r = candidate
    return float(r)


def critical_points(fn, xtol=ROOT_XTOL):
    """Zeros of F on R, at most two, bracketed by the zeros alpha < beta of h'."""
    zeros = fn.h_prime_zeros()
    if zeros is None or zeros[0] == zeros[1]:
        return []
    alpha, beta = zeros
    F_beta = float(fn.F(beta))
    if F_beta > 0.0:
        return []
    if F_beta == 0.0:
        return [beta]

    found = []
    lo = alpha
    for _ in range(60):
        if float(fn.F(lo)) > 0.0:
            break
        lo -= 1.0
    else:
        logging.warning(f"F not resolvable left of alpha for {fn!r}; skipping first zero")
        lo = None
    if lo is not None:
        found.append(brentq(fn.F, lo, beta, xtol=xtol, rtol=_RTOL))

    hi = max(beta, fn.d) + 1.0
    while float(fn.F(hi)) <= 0.0:
        hi = beta + 2.0 * (hi - beta)
    found.append(brentq(fn.F, beta, hi, xtol=xtol, rtol=_RTOL))
    return [float(z) for z in found]


def _dedupe(points, values, spacing):
    merged = []
    for t, v in sorted(zip(points, values)):
        if merged and t - merged[-1][0] <= spacing:
            if v < merged[-1][1]:
                merged[-1] = (t, v)
            continue
        merged.append((t, v))
    return merged


def search_minimizers(cm, tie_tolerance=TIE_TOLERANCE, dedup_spacing=DEDUP_SPACING,
                      xtol=ROOT_XTOL):
    """Enumerate {0, r*} and the zeros of F inside (0, r*); classify and rank them.

    Candidates are ranked by log f so that the minimum stays resolvable when
    f underflows (large d); ties and the gap are measured on f itself.
    """
    fn = _require_canonical(cm)
    r_star = median_r_star(cm)
    interior = [z for z in critical_points(fn, xtol) if 0.0 < z < r_star]
    points = [0.0, r_star] + interior
    log_values = [float(v) for v in fn.log_f(np.asarray(points))]
    ranked = _dedupe(points, log_values, dedup_spacing)

    best_t, log_h = min(ranked, key=lambda tv: tv[1])
    h = math.exp(log_h)
    candidates = [(t, math.exp(lv)) for t, lv in ranked]
    local_minima = []
    for t, v in candidates:
        if t == 0.0:
            is_min = float(fn.F(0.0)) <= 0.0
        elif t == r_star:
            is_min = float(fn.F(r_star)) >= 0.0
        else:
            is_min = float(fn.h_prime(t)) > 0.0
        if is_min or t == best_t:
            local_minima.append((t, v))

    minimizers = sorted(t for t, v in local_minima if v - h <= tie_tolerance)
    others = sorted(v for t, v in local_minima if t != best_t)
    gap = others[0] - h if others else math.inf
    logging.debug(f"m={fn.m} d={fn.d}: r*={r_star}, candidates={candidates}, log h={log_h}")
    return MinimizerSearch(h=h, r_star=r_star, minimizers=minimizers, candidates=candidates,
                           local_minima=local_minima, gap=gap, log_h=log_h)


def find_minimizers(cm):
    """(h, O): the minimum of f over [0, r*] and its minimizers."""
    search = search_minimizers(cm)
    return search.h, search.minimizers


def solver_options(config=None):
    """Keyword arguments for cheeger/search_minimizers from the 'solver' config section."""
    config = config or config_manager
    return {
        'tie_tolerance': config.get('solver.tie_tolerance', TIE_TOLERANCE),
        'dedup_spacing': config.get('solver.dedup_spacing', DEDUP_SPACING),
        'xtol': config.get('solver.root_xtol', ROOT_XTOL),
    }


def cheeger(spec, tie_tolerance=TIE_TOLERANCE, dedup_spacing=DEDUP_SPACING, xtol=ROOT_XTOL):
    """Cheeger constant and Cheeger half-spaces of the mixture described by spec."""
    cm = canonicalize(spec)
    if isinstance(cm, DegenerateGaussian):
        e1 = np.zeros(cm.n)
        e1[0] = 1.0
        c = cm.center[0]
        return CheegerSolution(
            h=SQRT_2_OVER_PI, r_star=0.0, minimizers=[0.0],
            halfspaces=[HalfSpace(tuple(e1), c, MINUS), HalfSpace(tuple(e1), c, PLUS)],
            unique=True, degenerate_gaussian=True, log_h=math.log(SQRT_2_OVER_PI))

    search = search_minimizers(cm, tie_tolerance=tie_tolerance, dedup_spacing=dedup_spacing,
                               xtol=xtol)
    halfspaces = []
    for t in search.minimizers:
        halfspaces.append(HalfSpace(cm.nu, cm.offset + t, MINUS))
        halfspaces.append(HalfSpace(cm.nu, cm.offset + t, PLUS))
    logging.info(f"Cheeger constant {search.h:.12g} (log {search.log_h:.12g}; m={cm.m}, "
                 f"d={cm.d}, {len(search.minimizers)} minimizer(s))")
    return CheegerSolution(
        h=search.h, r_star=search.r_star, minimizers=search.minimizers,
        halfspaces=halfspaces, unique=len(search.minimizers) == 1,
        m=cm.m, d=cm.d, gap=search.gap, log_h=search.log_h)


def _invert_Q(fn, v, lo, hi):
    def excess(r):
        return float(fn.Q(r)) - v

    r = brentq(excess, lo, hi, xtol=ROOT_XTOL, rtol=_RTOL)
    density = float(fn.dQ(r))
    if density > 0.0:
        candidate = r - excess(r) / density
        if lo <= candidate <= hi:
            r = candidate
    return float(r)


def iso_profile(cm, v_grid, restricted=True):
    """Points of the half-space isoperimetric profile Q' o Q^{-1}.

    In restricted mode the volumes must lie in [Q(0), Q(d)], the range on
    which this profile is the restricted isoperimetric function.
    """
    fn = _require_canonical(cm)
    v_lo, v_hi = float(fn.Q(0.0)), float(fn.Q(fn.d))
    if restricted:
        lo, hi = -PROFILE_BRACKET, fn.d + PROFILE_BRACKET
    else:
        lo, hi = -40.0, fn.d + 40.0

    points = []
    for v in v_grid:
        v = float(v)
        if restricted:
            if not v_lo - 1e-15 <= v <= v_hi + 1e-15:
                raise DomainError(f"volume {v} outside the valid interval [{v_lo}, {v_hi}]")
            v = min(max(v, v_lo), v_hi)
        elif not 0.0 < v < 1.0:
            raise DomainError(f"volume {v} outside (0, 1)")
        r = _invert_Q(fn, v, lo, hi)
        points.append(ProfilePoint(v=v, iso=float(fn.dQ(r)), r=r))
    return points


def check_r_star_location(cm):
    """d/2 <= r* < d."""
    r = median_r_star(cm)
    return bool(0.5 * cm.d <= r < cm.d)


def check_halfspace_ratio_monotone(cm, grid_size=1000):
    """t -> mu_+(H^+_{d-t}) / mu(H^+_{d-t}) strictly decreasing on [0, d/2]."""
    fn = _require_canonical(cm)
    if grid_size < 100:
        raise DomainError(f"grid_size must be at least 100, got {grid_size}")
    s = fn.d - np.linspace(0.0, 0.5 * fn.d, grid_size)
    ratio = fn.dQ(s) / fn.sf(s)
    return bool(np.all(np.diff(ratio) < 0.0))


def check_local_logconcavity(a_ratio, d, grid_size=1000):
    """(log J)'' < 0 on [0, d/2] for J(x) = a int_{-inf}^x e^{-t^2/2} + int_{-inf}^x e^{-(t-d)^2/2}."""
    if not a_ratio >= 1.0:
        raise DomainError(f"a_ratio must be >= 1, got {a_ratio}")
    if not d >= 0.0:
        raise DomainError(f"d must be >= 0, got {d}")
    if grid_size < 100:
        raise DomainError(f"grid_size must be at least 100, got {grid_size}")
    x = np.linspace(0.0, 0.5 * d, grid_size)
    g0 = np.exp(-0.5 * x * x)
    g1 = np.exp(-0.5 * (x - d) ** 2)
    J = SQRT_2PI * (a_ratio * std_normal_cdf(x) + std_normal_cdf(x - d))
    dJ = a_ratio * g0 + g1
    d2J = -a_ratio * x * g0 - (x - d) * g1
    second = (d2J * J - dJ * dJ) / (J * J)
    return bool(np.all(second < 0.0))


def check_ode_inequality(grid_size=10_000):
    """exp((x^2 - 1)/2) < x + f(x)/F(x) on [0, 1], f(t) = e^{-t^2/2}, F = int f."""
    if grid_size < 100:
        raise DomainError(f"grid_size must be at least 100, got {grid_size}")
    x = np.linspace(0.0, 1.0, grid_size)
    return bool(np.all(np.exp(0.5 * (x * x - 1.0)) < x + mills_ratio(x)))


def run_lemma_checks(m, d, grid_size=1000):
    """All four inequality checks for the canonical mixture (m, d), in dependency order."""
    cm = CanonicalMixture.from_md(m, d)
    results = {
        'ode_inequality': check_ode_inequality(max(grid_size, 100)),
        'local_log_concavity': check_local_logconcavity((1.0 - m) / m, d, grid_size),
        'halfspace_ratio_monotone': check_halfspace_ratio_monotone(cm, grid_size),
        'r_star_location': check_r_star_location(cm),
    }
    for name, passed in results.items():
        if not passed:
            logging.warning(f"Check {name} failed for m={m}, d={d}")
    return results
