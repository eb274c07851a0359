import numpy as np
import pytest

from meanmap import (
    DiscreteDist,
    GaussianDist,
    GaussianMixture,
    InvalidInputError,
    KdeModel,
    LdsModel,
    sample,
    validate,
)


class TestValidate:
    def test_discrete_ok(self):
        assert validate(DiscreteDist([0.5, 0.5])) == []

    def test_discrete_bad_sum(self):
        problems = validate(DiscreteDist([0.7, 0.7]))
        assert any("sum" in p for p in problems)

    def test_discrete_negative(self):
        assert validate(DiscreteDist([1.5, -0.5]))

    def test_gaussian_ok(self):
        assert validate(GaussianDist([0.0], [[1.0]])) == []

    def test_gaussian_not_pd(self):
        sigma = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        problems = validate(GaussianDist(np.zeros(2), sigma))
        assert any("positive definite" in p for p in problems)

    def test_gaussian_asymmetric(self):
        problems = validate(GaussianDist(np.zeros(2), [[1.0, 0.5], [0.1, 1.0]]))
        assert any("symmetric" in p for p in problems)

    def test_mixture_propagates(self):
        bad = GaussianDist(np.zeros(1), [[-1.0]])
        mix = GaussianMixture([1.0], (bad,))
        assert any("component 0" in p for p in validate(mix))

    def test_kde_bandwidth(self):
        assert validate(KdeModel([[0.0]], 0.0))

    def test_lds_psd(self):
        model = LdsModel(
            A=[[0.5]], C=[[1.0]], R=[[-1.0]], mu0=[0.0], sigma0=[[1.0]]
        )
        assert any("R" in p for p in validate(model))


class TestShapes:
    def test_mixture_dim_mismatch(self):
        with pytest.raises(InvalidInputError):
            GaussianMixture(
                [0.5, 0.5],
                (GaussianDist([0.0], [[1.0]]), GaussianDist([0.0, 0.0], np.eye(2))),
            )

    def test_lds_shapes(self):
        with pytest.raises(InvalidInputError):
            LdsModel(A=[[1.0]], C=[[1.0]], R=np.eye(2), mu0=[0.0], sigma0=[[1.0]])

    def test_immutable(self):
        d = DiscreteDist([0.3, 0.7])
        with pytest.raises(ValueError):
            d.alpha[0] = 1.0


class TestSample:
    def test_point_mass(self):
        draws = sample(DiscreteDist([1.0, 0.0]), seed=4, count=5)
        assert (draws == 0).all()

    def test_determinism(self):
        a = sample(GaussianDist([0.0, 1.0], np.eye(2)), seed=11, count=100)
        b = sample(GaussianDist([0.0, 1.0], np.eye(2)), seed=11, count=100)
        assert (a == b).all()

    def test_gaussian_moments(self):
        n = 10**6
        draws = sample(GaussianDist(np.zeros(2), np.eye(2)), seed=3, count=n)
        # CLT bound: each coordinate mean within 4/sqrt(n) of 0
        assert np.abs(draws.mean(axis=0)).max() < 4.0 / np.sqrt(n)
        # empirical covariance within 5 standard errors (se ~ sqrt(2/n) diag)
        emp = np.cov(draws.T)
        assert np.abs(emp - np.eye(2)).max() < 5.0 * np.sqrt(2.0 / n)

    def test_mixture_weights(self):
        mix = GaussianMixture(
            [0.8, 0.2],
            (GaussianDist([-10.0], [[0.01]]), GaussianDist([10.0], [[0.01]])),
        )
        draws = sample(mix, seed=7, count=20000)
        frac_hi = float((draws > 0).mean())
        assert abs(frac_hi - 0.2) < 0.02

    def test_kde_centers(self):
        kde = KdeModel([[0.0], [100.0]], 1e-6)
        draws = sample(kde, seed=0, count=1000)
        assert ((np.abs(draws) < 1.0) | (np.abs(draws - 100) < 1.0)).all()

    def test_invalid_model_rejected(self):
        with pytest.raises(InvalidInputError):
            sample(DiscreteDist([0.7, 0.7]), seed=0, count=3)

    def test_lds_needs_horizon(self):
        model = LdsModel(A=[[0.5]], C=[[1.0]], R=[[0.1]], mu0=[0.0], sigma0=[[1.0]])
        with pytest.raises(InvalidInputError):
            sample(model, seed=0, count=2)
        draws = sample(model, seed=0, count=8, horizon=3)
        assert draws.shape == (8, 4)
