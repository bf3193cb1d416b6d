"""Independent numerical verification of the half-space solution.

Exact measure/perimeter formulas for half-spaces, slabs and balls, seeded
Monte-Carlo estimates of measures and outer Minkowski contents, checks of
the Gaussian shift inequality, and the randomized Cheeger lower-bound sweep.
"""
import math
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from cheeger_solver import MINUS, PLUS, HalfSpace, cheeger, cheeger_ratio
from mixture_core import MixtureSpec
from special_fn import std_normal_cdf, std_normal_pdf, std_normal_sf
from utils import DomainError, VerificationFailure, config_manager

BAND = config_manager.get('oracle.band', 4.0)
FLOOR = config_manager.get('oracle.floor', 1e-3)
EPSILONS = tuple(config_manager.get('oracle.epsilons', [1e-2, 5e-3, 2.5e-3]))
EXACT_SLACK = 1e-9
EQUALITY_TOLERANCE = 1e-10
TILT_ANGLE = 0.1
MIN_SAMPLES = 10_000
BATCH = 1 << 18

# SeedSequence purpose words; every key is (seed, stream, purpose)
SET_DRAW, SAMPLING, SHIFT_DRAW, SHIFT_SAMPLING = 1, 2, 3, 4


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        center = tuple(float(v) for v in np.atleast_1d(self.center))
        if not all(math.isfinite(v) for v in center) or not math.isfinite(self.radius):
            raise DomainError("ball parameters must be finite")
        if not self.radius > 0.0:
            raise DomainError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, 'center', center)
        object.__setattr__(self, 'radius', float(self.radius))

    @property
    def n(self):
        return len(self.center)

    def _norm(self, points):
        return np.linalg.norm(np.asarray(points, dtype=float) - np.asarray(self.center), axis=-1)

    def contains(self, points):
        return self._norm(points) < self.radius

    def outer_distance(self, points):
        return np.maximum(self._norm(points) - self.radius, 0.0)

    def to_dict(self):
        return {'kind': 'ball', 'center': list(self.center), 'radius': self.radius}


@dataclass(frozen=True)
class Slab:
    """{c_lo < x . nu < c_hi}."""
    nu: tuple
    c_lo: float
    c_hi: float

    def __post_init__(self):
        nu = tuple(float(v) for v in np.atleast_1d(self.nu))
        if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
            raise DomainError(f"slab normal must be a unit vector, got {nu}")
        if not (math.isfinite(self.c_lo) and math.isfinite(self.c_hi)):
            raise DomainError("slab offsets must be finite")
        if not self.c_lo < self.c_hi:
            raise DomainError(f"slab needs c_lo < c_hi, got {self.c_lo} >= {self.c_hi}")
        object.__setattr__(self, 'nu', nu)
        object.__setattr__(self, 'c_lo', float(self.c_lo))
        object.__setattr__(self, 'c_hi', float(self.c_hi))

    @property
    def n(self):
        return len(self.nu)

    def projection(self, points):
        return np.asarray(points, dtype=float) @ np.asarray(self.nu)

    def contains(self, points):
        s = self.projection(points)
        return (s > self.c_lo) & (s < self.c_hi)

    def outer_distance(self, points):
        s = self.projection(points)
        return np.maximum(np.maximum(self.c_lo - s, s - self.c_hi), 0.0)

    def to_dict(self):
        return {'kind': 'slab', 'nu': list(self.nu), 'c_lo': self.c_lo, 'c_hi': self.c_hi}


@dataclass(frozen=True)
class FullSpace:
    n: int

    def contains(self, points):
        return np.ones(np.asarray(points).shape[0], dtype=bool)

    def outer_distance(self, points):
        return np.zeros(np.asarray(points).shape[0])

    def to_dict(self):
        return {'kind': 'full', 'n': self.n}


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    samples: int
    seed: int
    levels: tuple = field(default=())

    def to_dict(self):
        return {'value': self.value, 'std_error': self.std_error, 'samples': self.samples,
                'seed': self.seed, 'levels': list(self.levels)}


def _generator(seed, stream, purpose):
    if seed < 0 or stream < 0:
        raise DomainError(f"seed and stream must be non-negative, got {seed}, {stream}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, purpose])))


def _check_dimension(spec, test_set):
    if test_set.n != spec.n:
        raise DomainError(f"test set lives in R^{test_set.n}, mixture in R^{spec.n}")


def iter_mixture_batches(spec, samples, seed, stream=0, batch=BATCH, purpose=SAMPLING):
    """Draws from the mixture in fixed-size batches of one Philox stream."""
    rng = _generator(seed, stream, purpose)
    remaining = samples
    while remaining > 0:
        size = min(batch, remaining)
        first = rng.random(size) < spec.p
        centers = np.where(first[:, None], spec.a_vec, spec.b_vec)
        yield centers + rng.standard_normal((size, spec.n))
        remaining -= size


def sample_mixture(spec, samples, seed, stream=0):
    return np.concatenate(list(iter_mixture_batches(spec, samples, seed, stream)))


# ---------------- Exact formulas ----------------

def _projections(spec, nu):
    nu = np.asarray(nu)
    return float(spec.a_vec @ nu), float(spec.b_vec @ nu)


def halfspace_measure(spec, hs):
    pa, pb = _projections(spec, hs.nu)
    if hs.side == MINUS:
        return spec.p * std_normal_cdf(hs.c - pa) + (1.0 - spec.p) * std_normal_cdf(hs.c - pb)
    return spec.p * std_normal_sf(hs.c - pa) + (1.0 - spec.p) * std_normal_sf(hs.c - pb)


def halfspace_perimeter(spec, hs):
    pa, pb = _projections(spec, hs.nu)
    return spec.p * std_normal_pdf(hs.c - pa) + (1.0 - spec.p) * std_normal_pdf(hs.c - pb)


def halfspace_ratio(spec, hs):
    return float(cheeger_ratio(halfspace_measure(spec, hs), halfspace_perimeter(spec, hs)))


def slab_measure(spec, slab):
    pa, pb = _projections(spec, slab.nu)
    lo = spec.p * std_normal_cdf(slab.c_lo - pa) + (1.0 - spec.p) * std_normal_cdf(slab.c_lo - pb)
    hi = spec.p * std_normal_cdf(slab.c_hi - pa) + (1.0 - spec.p) * std_normal_cdf(slab.c_hi - pb)
    return hi - lo


def slab_perimeter(spec, slab):
    pa, pb = _projections(spec, slab.nu)
    return sum(spec.p * std_normal_pdf(c - pa) + (1.0 - spec.p) * std_normal_pdf(c - pb)
               for c in (slab.c_lo, slab.c_hi))


def ball_measure(spec, ball):
    """Non-central chi-square law of |X - center|^2 under each component."""
    total = 0.0
    radius2 = ball.radius ** 2
    for weight, mean in ((spec.p, spec.a_vec), (1.0 - spec.p, spec.b_vec)):
        if weight == 0.0:
            continue
        nc = float(np.sum((mean - np.asarray(ball.center)) ** 2))
        if nc == 0.0:
            total += weight * stats.chi2.cdf(radius2, spec.n)
        else:
            total += weight * stats.ncx2.cdf(radius2, spec.n, nc)
    return float(total)


def ball_perimeter(spec, ball):
    """d/dR of ball_measure: 2R times the (non-central) chi-square density at R^2."""
    total = 0.0
    radius2 = ball.radius ** 2
    for weight, mean in ((spec.p, spec.a_vec), (1.0 - spec.p, spec.b_vec)):
        if weight == 0.0:
            continue
        nc = float(np.sum((mean - np.asarray(ball.center)) ** 2))
        if nc == 0.0:
            total += weight * stats.chi2.pdf(radius2, spec.n)
        else:
            total += weight * stats.ncx2.pdf(radius2, spec.n, nc)
    return float(2.0 * ball.radius * total)


def exact_measure(spec, test_set):
    _check_dimension(spec, test_set)
    if isinstance(test_set, HalfSpace):
        return float(halfspace_measure(spec, test_set))
    if isinstance(test_set, Slab):
        return float(slab_measure(spec, test_set))
    if isinstance(test_set, Ball):
        return ball_measure(spec, test_set)
    if isinstance(test_set, FullSpace):
        return 1.0
    raise DomainError(f"unsupported test set {test_set!r}")


def exact_perimeter(spec, test_set):
    """Closed-form mixture perimeter of any supported test set."""
    _check_dimension(spec, test_set)
    if isinstance(test_set, HalfSpace):
        return float(halfspace_perimeter(spec, test_set))
    if isinstance(test_set, Slab):
        return float(slab_perimeter(spec, test_set))
    if isinstance(test_set, Ball):
        return ball_perimeter(spec, test_set)
    if isinstance(test_set, FullSpace):
        return 0.0
    raise DomainError(f"unsupported test set {test_set!r}")


def min_perpendicular_ratio(spec, grid_size=20_001, margin=3.0):
    """Smallest exact Cheeger ratio over half-spaces perpendicular to b - a."""
    d = spec.distance
    nu = (spec.b_vec - spec.a_vec) / d
    base = float(spec.a_vec @ nu)
    offsets = base + np.linspace(-margin, d + margin, grid_size)
    pa, pb = base, base + d
    volume = spec.p * std_normal_cdf(offsets - pa) + (1.0 - spec.p) * std_normal_cdf(offsets - pb)
    perimeter = spec.p * std_normal_pdf(offsets - pa) + (1.0 - spec.p) * std_normal_pdf(offsets - pb)
    return float(np.min(cheeger_ratio(volume, perimeter)))


# ---------------- Monte-Carlo estimators ----------------

def mc_measure(spec, test_set, samples, seed, stream=0):
    """Hit fraction of mixture draws inside the set."""
    if samples < MIN_SAMPLES:
        raise DomainError(f"at least {MIN_SAMPLES} samples required, got {samples}")
    _check_dimension(spec, test_set)
    hits = 0
    for batch in iter_mixture_batches(spec, samples, seed, stream):
        hits += int(np.count_nonzero(test_set.contains(batch)))
    value = hits / samples
    std_error = math.sqrt(max(value * (1.0 - value), 0.0) * samples / (samples - 1) / samples)
    return McEstimate(value=value, std_error=std_error, samples=samples, seed=seed)


def richardson_weights(epsilons):
    """Weights w with sum w = 1 cancelling the eps, eps^2, ... error terms."""
    eps = np.asarray(epsilons, dtype=float)
    k = len(eps)
    vander = np.vander(eps, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[0] = 1.0
    return np.linalg.solve(vander, rhs)


def mc_minkowski(spec, test_set, samples, seed, stream=0, epsilons=EPSILONS):
    """Outer Minkowski content mu(A^eps minus A)/eps, Richardson-extrapolated over the eps ladder.

    All levels share the same draws, so the extrapolated estimate is a
    per-sample linear combination and its standard error is exact.
    """
    if samples < MIN_SAMPLES:
        raise DomainError(f"at least {MIN_SAMPLES} samples required, got {samples}")
    _check_dimension(spec, test_set)
    eps = np.asarray(epsilons, dtype=float)
    weights = richardson_weights(eps)
    level_hits = np.zeros(len(eps))
    total = 0.0
    total_sq = 0.0
    for batch in iter_mixture_batches(spec, samples, seed, stream):
        dist = test_set.outer_distance(batch)
        shell = (dist[:, None] > 0.0) & (dist[:, None] <= eps[None, :])
        level_hits += shell.sum(axis=0)
        y = (shell / eps[None, :]) @ weights
        total += float(y.sum())
        total_sq += float((y * y).sum())
    mean = total / samples
    variance = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    levels = tuple(float(v) for v in level_hits / samples / eps)
    return McEstimate(value=mean, std_error=math.sqrt(variance / samples),
                      samples=samples, seed=seed, levels=levels)


# ---------------- Shift inequality ----------------

def gaussian_ball(t, n):
    """Origin-centred ball with standard Gaussian measure Phi(t)."""
    radius = math.sqrt(stats.chi2.ppf(std_normal_cdf(t), n))
    return Ball(center=tuple(np.zeros(n)), radius=radius)


def shifted_measure(test_set, lam, nu=None, samples=None, seed=0, stream=0):
    """gamma(E + lam nu) for the standard Gaussian: exact for half-spaces, Monte-Carlo otherwise."""
    n = test_set.n
    if nu is None:
        nu = np.zeros(n)
        nu[0] = 1.0
    nu = np.asarray(nu, dtype=float)
    if isinstance(test_set, HalfSpace):
        shifted = test_set.c + lam * float(nu @ np.asarray(test_set.nu))
        value = std_normal_cdf(shifted) if test_set.side == MINUS else std_normal_sf(shifted)
        return McEstimate(value=float(value), std_error=0.0, samples=0, seed=seed)
    standard = MixtureSpec(p=1.0, a=np.zeros(n), b=np.zeros(n))
    samples = samples or MIN_SAMPLES
    hits = 0
    for batch in iter_mixture_batches(standard, samples, seed, stream, purpose=SHIFT_SAMPLING):
        hits += int(np.count_nonzero(test_set.contains(batch - lam * nu)))
    value = hits / samples
    std_error = math.sqrt(max(value * (1.0 - value), 0.0) / (samples - 1))
    return McEstimate(value=value, std_error=std_error, samples=samples, seed=seed)


def shift_bounds_check(t, lam, test_set, samples=None, seed=0, nu=None, stream=0):
    """Phi(t - |lam|) <= gamma(E + lam nu) <= Phi(t + |lam|) within the acceptance band."""
    estimate = shifted_measure(test_set, lam, nu=nu, samples=samples, seed=seed, stream=stream)
    slack = BAND * estimate.std_error if estimate.std_error > 0.0 else 1e-12
    lower = std_normal_cdf(t - abs(lam))
    upper = std_normal_cdf(t + abs(lam))
    return bool(lower - slack <= estimate.value <= upper + slack)


# ---------------- Randomized lower-bound sweep ----------------

def _random_unit(rng, n):
    u = rng.standard_normal(n)
    return u / np.linalg.norm(u)


def _offset_for_volume(spec, nu, volume):
    pa, pb = _projections(spec, nu)

    def excess(c):
        return spec.p * std_normal_cdf(c - pa) + (1.0 - spec.p) * std_normal_cdf(c - pb) - volume

    return brentq(excess, min(pa, pb) - 12.0, max(pa, pb) + 12.0, xtol=1e-13)


def _radius_for_volume(spec, center, volume):
    def excess(radius):
        return ball_measure(spec, Ball(center, radius)) - volume

    hi = 1.0
    while excess(hi) <= 0.0:
        hi *= 2.0
    return brentq(excess, 1e-9, hi, xtol=1e-12)


def random_test_set(spec, kind, rng):
    """Random set of the given kind with mixture measure in (0.02, 0.98)."""
    n = spec.n
    if kind == 'halfspace':
        nu = _random_unit(rng, n)
        c = _offset_for_volume(spec, nu, rng.uniform(0.02, 0.98))
        return HalfSpace(tuple(nu), c, MINUS if rng.random() < 0.5 else PLUS)
    if kind == 'slab':
        nu = _random_unit(rng, n)
        v_lo, v_hi = sorted(rng.uniform(0.01, 0.99, size=2))
        if v_hi - v_lo < 0.02:
            v_hi = min(v_lo + 0.02, 0.99)
            v_lo = v_hi - 0.02
        c_lo = _offset_for_volume(spec, nu, v_lo)
        c_hi = _offset_for_volume(spec, nu, v_hi)
        return Slab(tuple(nu), c_lo, c_hi)
    if kind == 'ball':
        a, b = spec.a_vec, spec.b_vec
        center = a + (b - a) * rng.uniform(-0.25, 1.25) + 0.5 * rng.standard_normal(n)
        radius = _radius_for_volume(spec, tuple(center), rng.uniform(0.02, 0.98))
        return Ball(tuple(center), radius)
    raise DomainError(f"unknown test-set kind {kind!r}")


def _shift_trials(count, n, samples, seed):
    passed = 0
    failures = []
    for i in range(count):
        rng = _generator(seed, i, SHIFT_DRAW)
        t = rng.uniform(-2.0, 2.0)
        lam = rng.uniform(-3.0, 3.0)
        nu = _random_unit(rng, n)
        if i % 2 == 0:
            test_set = HalfSpace(tuple(_random_unit(rng, n)), t, MINUS)
        else:
            test_set = gaussian_ball(t, n)
        if shift_bounds_check(t, lam, test_set, samples=samples, seed=seed, nu=nu, stream=i):
            passed += 1
        else:
            failures.append({'check': 'shift_inequality', 'trial': i, 't': t, 'lambda': lam,
                             'nu': list(nu), 'set': test_set.to_dict(), 'seed': seed})
    return passed, failures


def verify_cheeger_lower_bound(spec, trials, samples, seed,
                               kinds=('halfspace', 'ball', 'slab'), shift_trials=0,
                               strict=False, tolerances=None):
    """Check that no random test set beats the computed Cheeger constant.

    Half-space ratios are exact; ball and slab perimeters come from
    mc_minkowski with the acceptance band max(BAND * se, FLOOR). With
    strict=True a failing sweep raises VerificationFailure carrying the report.
    tolerances are forwarded to cheeger().
    """
    if spec.is_degenerate:
        raise DomainError("lower-bound verification needs a non-degenerate mixture")
    solution = cheeger(spec, **(tolerances or {}))
    h = solution.h
    axis = (spec.b_vec - spec.a_vec) / spec.distance

    violations = []
    equality_ratios = [halfspace_ratio(spec, hs) for hs in solution.halfspaces]
    for hs, ratio in zip(solution.halfspaces, equality_ratios):
        if abs(ratio - h) > EQUALITY_TOLERANCE:
            violations.append({'check': 'equality_case', 'set': hs.to_dict(), 'ratio': ratio})

    counts = {kind: 0 for kind in kinds}
    worst_ratio, worst_set = math.inf, None
    tilted_margin = math.inf
    for trial in range(trials):
        kind = kinds[trial % len(kinds)]
        counts[kind] += 1
        rng = _generator(seed, trial, SET_DRAW)
        test_set = random_test_set(spec, kind, rng)
        volume = exact_measure(spec, test_set)
        denominator = min(volume, 1.0 - volume)

        perimeter = exact_perimeter(spec, test_set) if kind == 'halfspace' else None
        if perimeter is not None:
            ratio, tolerance, ratio_se = perimeter / denominator, EXACT_SLACK, 0.0
        else:
            estimate = mc_minkowski(spec, test_set, samples, seed, stream=trial)
            ratio = estimate.value / denominator
            ratio_se = estimate.std_error / denominator
            tolerance = max(BAND * ratio_se, FLOOR)

        entry = {**test_set.to_dict(), 'trial': trial, 'seed': seed, 'volume': volume,
                 'ratio': ratio, 'ratio_se': ratio_se}
        if ratio < worst_ratio:
            worst_ratio, worst_set = ratio, entry
        if ratio < h - tolerance:
            violations.append({'check': 'lower_bound', **entry})

        if kind == 'halfspace':
            angle = math.acos(min(1.0, abs(float(np.asarray(test_set.nu) @ axis))))
            if angle > TILT_ANGLE:
                margin = ratio - h
                tilted_margin = min(tilted_margin, margin)
                if margin <= 0.0:
                    violations.append({'check': 'tilted_strictness', 'angle': angle, **entry})

    shift_passed = 0
    if shift_trials:
        shift_passed, shift_failures = _shift_trials(shift_trials, spec.n, samples, seed)
        violations.extend(shift_failures)

    passed = not violations
    if passed:
        logging.info(f"Lower-bound sweep passed: {trials} sets, worst ratio {worst_ratio:.6g} vs h {h:.6g}")
    else:
        logging.error(f"Lower-bound sweep found {len(violations)} violation(s)")
    report = {
        'spec': spec.to_dict(),
        'trials': trials,
        'samples': samples,
        'seed': seed,
        'h_mu': h,
        'worst_ratio': worst_ratio,
        'worst_set': worst_set,
        'tilted_margin': tilted_margin,
        'equality_ratios': equality_ratios,
        'counts': counts,
        'shift_checks': {'trials': shift_trials, 'passed': shift_passed},
        'violations': violations,
        'pass': passed,
    }
    if strict and not passed:
        raise VerificationFailure(f"{len(violations)} violation(s) of the Cheeger lower bound", report)
    return report
