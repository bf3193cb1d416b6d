import math
import dataclasses

import numpy as np
import pytest
from scipy import integrate, special, stats

from cheeger_solver import MINUS, PLUS, HalfSpace, cheeger
from mixture_core import MixtureSpec, canonicalize, mixture_cdf
import oracle
from oracle import (
    SAMPLING,
    SHIFT_SAMPLING,
    Ball,
    FullSpace,
    Slab,
    ball_measure,
    ball_perimeter,
    exact_measure,
    gaussian_ball,
    halfspace_measure,
    halfspace_perimeter,
    halfspace_ratio,
    iter_mixture_batches,
    mc_measure,
    mc_minkowski,
    min_perpendicular_ratio,
    richardson_weights,
    sample_mixture,
    shift_bounds_check,
    shifted_measure,
    slab_perimeter,
    verify_cheeger_lower_bound,
)
from special_fn import std_normal_cdf
from utils import DomainError, VerificationFailure

from conftest import SQRT_2_OVER_PI, symmetric_h


def chi2_3_cdf(x):
    density = lambda s: math.sqrt(s) * math.exp(-s / 2.0) / (2.0 ** 1.5 * special.gamma(1.5))
    value, _ = integrate.quad(density, 0.0, x, epsabs=0.0, epsrel=1e-12)
    return value


class TestTestSets:
    def test_ball_validation(self):
        with pytest.raises(DomainError):
            Ball((0.0, 0.0), 0.0)

    def test_slab_validation(self):
        with pytest.raises(DomainError):
            Slab((1.0, 0.0), 1.0, 1.0)
        with pytest.raises(DomainError):
            Slab((1.0, 1.0), 0.0, 1.0)

    def test_outer_distances(self):
        points = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, -2.5]])
        assert Ball((0.0, 0.0), 1.0).outer_distance(points).tolist() == [0.0, 2.0, 1.5]
        assert Slab((0.0, 1.0), -1.0, 1.0).outer_distance(points).tolist() == [0.0, 0.0, 1.5]
        assert FullSpace(2).outer_distance(points).tolist() == [0.0, 0.0, 0.0]

    def test_dimension_mismatch(self, symmetric_spec):
        with pytest.raises(DomainError):
            exact_measure(symmetric_spec, Ball((0.0, 0.0), 1.0))


class TestExactFormulas:
    def test_orthogonal_cut_through_both_centres(self, tilted_spec):
        axis = (tilted_spec.b_vec - tilted_spec.a_vec) / tilted_spec.distance
        normal = np.cross(axis, [0.0, 0.0, 1.0])
        normal /= np.linalg.norm(normal)
        hs = HalfSpace(tuple(normal), float(tilted_spec.a_vec @ normal), MINUS)
        assert halfspace_measure(tilted_spec, hs) == pytest.approx(0.5, abs=1e-12)

    def test_perpendicular_cut_reduces_to_the_mixture_cdf(self):
        spec = MixtureSpec.from_canonical(0.3, 2.0, n=3)
        cm = canonicalize(spec)
        for r in (-1.0, 0.5, 1.7, 3.0):
            hs = HalfSpace((1.0, 0.0, 0.0), r, MINUS)
            assert halfspace_measure(spec, hs) == pytest.approx(float(mixture_cdf(cm, r)), rel=1e-15)
            assert halfspace_measure(spec, hs.complement()) == pytest.approx(
                1.0 - float(mixture_cdf(cm, r)), rel=1e-13)

    def test_solution_halfspaces_attain_the_constant(self, tilted_spec):
        solution = cheeger(tilted_spec)
        for hs in solution.halfspaces:
            assert halfspace_ratio(tilted_spec, hs) == pytest.approx(solution.h, abs=1e-10)

    def test_midpoint_cut_sees_a_single_gaussian_marginal(self):
        spec = MixtureSpec(p=0.5, a=[0.0, 0.0], b=[3.0, 0.0])
        ratio = halfspace_ratio(spec, HalfSpace((0.0, 1.0), 0.0, PLUS))
        assert ratio == pytest.approx(SQRT_2_OVER_PI, rel=1e-14)
        assert ratio > symmetric_h(3.0)

    def test_ball_measure_matches_chi_square(self):
        spec = MixtureSpec(p=1.0, a=[0.0, 0.0, 0.0], b=[1.0, 0.0, 0.0])
        assert ball_measure(spec, Ball((0.0, 0.0, 0.0), 1.0)) == pytest.approx(chi2_3_cdf(1.0), rel=1e-10)

    def test_ball_perimeter_is_radial_derivative(self):
        spec = MixtureSpec(p=0.4, a=[0.0, 0.0], b=[2.0, 1.0])
        ball = Ball((0.5, 0.5), 1.3)
        step = 1e-6
        numeric = (ball_measure(spec, Ball(ball.center, 1.3 + step))
                   - ball_measure(spec, Ball(ball.center, 1.3 - step))) / (2 * step)
        assert ball_perimeter(spec, ball) == pytest.approx(numeric, rel=1e-5)

    def test_slab_is_a_difference_of_halfspaces(self, tilted_spec):
        nu = (0.0, 0.6, 0.8)
        slab = Slab(nu, -0.5, 1.0)
        upper = halfspace_measure(tilted_spec, HalfSpace(nu, 1.0, MINUS))
        lower = halfspace_measure(tilted_spec, HalfSpace(nu, -0.5, MINUS))
        assert exact_measure(tilted_spec, slab) == pytest.approx(upper - lower, rel=1e-14)
        assert slab_perimeter(tilted_spec, slab) == pytest.approx(
            halfspace_perimeter(tilted_spec, HalfSpace(nu, 1.0, MINUS))
            + halfspace_perimeter(tilted_spec, HalfSpace(nu, -0.5, MINUS)), rel=1e-14)

    @pytest.mark.parametrize('p, d', [(0.3, 2.0), (0.075, 3.0), (0.5, 1.0)])
    def test_perpendicular_minimum_is_dimension_free(self, p, d):
        values = [min_perpendicular_ratio(MixtureSpec.from_canonical(p, d, n)) for n in (1, 2, 3, 5)]
        assert max(values) - min(values) <= 1e-12


class TestMonteCarlo:
    def test_sampling_is_reproducible(self, tilted_spec):
        first = sample_mixture(tilted_spec, 1000, seed=11)
        again = sample_mixture(tilted_spec, 1000, seed=11)
        other = sample_mixture(tilted_spec, 1000, seed=12)
        assert np.array_equal(first, again)
        assert not np.array_equal(first, other)

    def test_full_space(self, tilted_spec):
        estimate = mc_measure(tilted_spec, FullSpace(3), 10_000, seed=0)
        assert estimate.value == 1.0 and estimate.std_error == 0.0

    def test_too_few_samples_rejected(self, tilted_spec):
        with pytest.raises(DomainError):
            mc_measure(tilted_spec, FullSpace(3), 100, seed=0)

    def test_symmetric_orthogonal_cut(self):
        spec = MixtureSpec(p=0.5, a=[0.0, 0.0], b=[2.0, 0.0])
        estimate = mc_measure(spec, HalfSpace((0.0, 1.0), 0.0, MINUS), 200_000, seed=1)
        assert abs(estimate.value - 0.5) <= 4 * estimate.std_error

    def test_unit_ball_under_a_single_gaussian(self):
        spec = MixtureSpec(p=1.0, a=[0.0, 0.0, 0.0], b=[5.0, 0.0, 0.0])
        estimate = mc_measure(spec, Ball((0.0, 0.0, 0.0), 1.0), 200_000, seed=2)
        assert abs(estimate.value - stats.chi2.cdf(1.0, 3)) <= 4 * estimate.std_error

    def test_estimates_are_deterministic(self, tilted_spec):
        ball = Ball((0.0, 0.0, 0.0), 1.5)
        assert mc_measure(tilted_spec, ball, 20_000, seed=5) == mc_measure(tilted_spec, ball, 20_000, seed=5)
        assert mc_minkowski(tilted_spec, ball, 20_000, seed=5) == mc_minkowski(tilted_spec, ball, 20_000, seed=5)

    def test_random_halfspaces_within_band(self, tilted_spec):
        rng = np.random.default_rng(4)
        inside = 0
        for i in range(100):
            nu = rng.standard_normal(3)
            hs = HalfSpace(tuple(nu / np.linalg.norm(nu)), rng.uniform(-1.5, 1.5), MINUS)
            estimate = mc_measure(tilted_spec, hs, 20_000, seed=100, stream=i)
            inside += abs(estimate.value - halfspace_measure(tilted_spec, hs)) <= 4 * estimate.std_error
        assert inside >= 99

    def test_richardson_weights(self):
        assert np.allclose(richardson_weights([1e-2, 5e-3, 2.5e-3]), [1.0 / 3.0, -2.0, 8.0 / 3.0])

    def test_minkowski_of_perpendicular_halfspace(self):
        spec = MixtureSpec.from_canonical(0.3, 2.0, n=2)
        hs = HalfSpace((1.0, 0.0), 1.2, MINUS)
        estimate = mc_minkowski(spec, hs, 1_000_000, seed=3)
        exact = halfspace_perimeter(spec, hs)
        assert abs(estimate.value - exact) <= max(4 * estimate.std_error, 1e-3)

    def test_minkowski_of_wide_slab(self):
        spec = MixtureSpec.from_canonical(0.3, 2.0, n=2)
        slab = Slab((0.6, 0.8), -0.5, 1.5)
        estimate = mc_minkowski(spec, slab, 1_000_000, seed=4)
        assert abs(estimate.value - slab_perimeter(spec, slab)) <= max(4 * estimate.std_error, 1e-3)

    def test_minkowski_of_ball(self):
        spec = MixtureSpec(p=0.5, a=[0.0, 0.0], b=[2.0, 0.0])
        ball = Ball((1.0, 0.0), 2.0)
        estimate = mc_minkowski(spec, ball, 1_000_000, seed=6)
        assert abs(estimate.value - ball_perimeter(spec, ball)) <= max(4 * estimate.std_error, 1e-3)
        assert len(estimate.levels) == 3


class TestShiftInequality:
    @pytest.mark.parametrize('t', [-1.0, 0.0, 0.8])
    def test_perpendicular_halfspace_attains_lower_bound(self, t):
        d = 2.0
        hs = HalfSpace((1.0, 0.0), t, MINUS)
        estimate = shifted_measure(hs, -d, nu=(1.0, 0.0))
        assert estimate.std_error == 0.0
        assert estimate.value == pytest.approx(std_normal_cdf(t - d), abs=1e-12)
        assert shift_bounds_check(t, -d, hs, nu=(1.0, 0.0))

    def test_no_shift_collapses_both_bounds(self):
        hs = HalfSpace((0.0, 1.0), 0.4, MINUS)
        assert shifted_measure(hs, 0.0).value == pytest.approx(std_normal_cdf(0.4), abs=1e-15)
        assert shift_bounds_check(0.4, 0.0, hs)

    def test_ball_sits_strictly_inside_the_bounds(self):
        t, lam = 0.3, 1.0
        ball = gaussian_ball(t, 2)
        estimate = shifted_measure(ball, lam, nu=(1.0, 0.0), samples=200_000, seed=8)
        lower, upper = std_normal_cdf(t - lam), std_normal_cdf(t + lam)
        assert lower + 4 * estimate.std_error < estimate.value < upper - 4 * estimate.std_error
        exact = stats.ncx2.cdf(ball.radius ** 2, 2, lam ** 2)
        assert abs(estimate.value - exact) <= 4 * estimate.std_error
        assert shift_bounds_check(t, lam, ball, samples=200_000, seed=8, nu=(1.0, 0.0))

    def test_shift_draws_use_their_own_stream(self):
        standard = MixtureSpec(p=1.0, a=[0.0, 0.0], b=[0.0, 0.0])
        shift = next(iter_mixture_batches(standard, 1000, 0, stream=3, purpose=SHIFT_SAMPLING))
        lower_bound = next(iter_mixture_batches(standard, 1000, 0, stream=3, purpose=SAMPLING))
        assert not np.array_equal(shift, lower_bound)

        ball, lam, nu = gaussian_ball(0.2, 2), 0.5, np.array([1.0, 0.0])
        estimate = shifted_measure(ball, lam, nu=nu, samples=20_000, seed=0, stream=3)
        hits = sum(int(np.count_nonzero(ball.contains(batch - lam * nu)))
                   for batch in iter_mixture_batches(standard, 20_000, 0, 3, purpose=SHIFT_SAMPLING))
        assert estimate.value == hits / 20_000


class TestLowerBoundSweep:
    def test_exact_halfspaces(self, tilted_spec):
        report = verify_cheeger_lower_bound(tilted_spec, trials=200, samples=10_000, seed=0,
                                            kinds=('halfspace',))
        assert report['pass']
        assert report['worst_ratio'] >= report['h_mu'] - 1e-9
        assert report['tilted_margin'] > 0.0
        assert report['counts'] == {'halfspace': 200}
        assert all(abs(r - report['h_mu']) <= 1e-10 for r in report['equality_ratios'])

    def test_mixed_sets_with_shift_checks(self, tilted_spec):
        report = verify_cheeger_lower_bound(tilted_spec, trials=6, samples=200_000, seed=1,
                                            shift_trials=4)
        assert report['pass'], report['violations']
        assert report['counts'] == {'halfspace': 2, 'ball': 2, 'slab': 2}
        assert report['shift_checks'] == {'trials': 4, 'passed': 4}

    def test_report_is_reproducible(self, tilted_spec):
        kwargs = dict(trials=3, samples=20_000, seed=9, kinds=('ball',))
        assert verify_cheeger_lower_bound(tilted_spec, **kwargs) == verify_cheeger_lower_bound(tilted_spec, **kwargs)

    def test_degenerate_rejected(self):
        with pytest.raises(DomainError):
            verify_cheeger_lower_bound(MixtureSpec(p=0.0, a=[0.0], b=[1.0]), 1, 10_000, 0)

    @pytest.mark.slow
    def test_acceptance_sweep(self, tilted_spec):
        exact = verify_cheeger_lower_bound(tilted_spec, trials=500, samples=10_000, seed=0,
                                           kinds=('halfspace',))
        assert exact['pass']
        mc = verify_cheeger_lower_bound(tilted_spec, trials=100, samples=1_000_000, seed=0,
                                        kinds=('ball', 'slab'), shift_trials=50)
        assert mc['pass'], mc['violations']


@pytest.fixture
def inflated_constant(monkeypatch):
    """Report a Cheeger constant 0.05 above the true one."""
    original = oracle.cheeger

    def inflated(spec, **kwargs):
        solution = original(spec, **kwargs)
        return dataclasses.replace(solution, h=solution.h + 0.05)

    monkeypatch.setattr(oracle, 'cheeger', inflated)


class TestFalsifiedSweep:
    def test_strict_sweep_raises_with_report(self, tilted_spec, inflated_constant):
        with pytest.raises(VerificationFailure) as excinfo:
            verify_cheeger_lower_bound(tilted_spec, trials=20, samples=10_000, seed=0,
                                       kinds=('halfspace',), strict=True)
        assert excinfo.value.report['pass'] is False
        assert excinfo.value.report['violations']

    def test_lenient_sweep_returns_failing_report(self, tilted_spec, inflated_constant):
        report = verify_cheeger_lower_bound(tilted_spec, trials=20, samples=10_000, seed=0,
                                            kinds=('halfspace',))
        assert report['pass'] is False
        assert any(v['check'] == 'equality_case' for v in report['violations'])
