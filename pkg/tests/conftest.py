import math

import numpy as np
import pytest
from hypothesis import settings

from mixture_core import CanonicalMixture, MixtureSpec

settings.register_profile('default', max_examples=40, deadline=None)
settings.load_profile('default')

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def symmetric_h(d):
    return SQRT_2_OVER_PI * math.exp(-d * d / 8.0)


@pytest.fixture
def symmetric_spec():
    return MixtureSpec.from_canonical(0.5, 2.0)


@pytest.fixture
def tilted_spec():
    """p = 0.3, |b - a| = 2 in R^3 with b - a not along an axis."""
    direction = np.array([1.0, 2.0, -2.0]) / 3.0
    a = np.array([0.5, -1.0, 0.25])
    return MixtureSpec(p=0.3, a=a, b=a + 2.0 * direction)


@pytest.fixture
def bimodal():
    return CanonicalMixture.from_md(0.075, 3.0)


def random_rotation(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
