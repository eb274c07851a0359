import numpy as np
import pytest

from meanmap import DiscreteDist, GaussianDist, GaussianMixture, Hmm


def random_covariance(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T) + 0.3 * np.eye(d)


def random_gaussian(rng, d):
    return GaussianDist(rng.standard_normal(d), random_covariance(rng, d))


def random_mixture(rng, d, m):
    return GaussianMixture(
        rng.dirichlet(np.ones(m)),
        tuple(random_gaussian(rng, d) for _ in range(m)),
    )


def random_discrete(rng, k):
    return DiscreteDist(rng.dirichlet(np.ones(k)))


def random_discrete_hmm(rng, n, k):
    pi = rng.dirichlet(np.ones(n))
    A = np.vstack([rng.dirichlet(np.ones(n)) for _ in range(n)])
    return Hmm(pi, A, tuple(random_discrete(rng, k) for _ in range(n)))


def random_gaussian_hmm(rng, n, d, m=1):
    pi = rng.dirichlet(np.ones(n))
    A = np.vstack([rng.dirichlet(np.ones(n)) for _ in range(n)])
    return Hmm(pi, A, tuple(random_mixture(rng, d, m) for _ in range(n)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
