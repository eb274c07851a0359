import math

import numpy as np
import pytest

from meanmap import (
    DiscreteDist,
    Hmm,
    InvalidInputError,
    TildeTransformConfig,
    check_psd,
    enum_posteriors,
    forward_backward,
    lmmk,
    lmmk_features,
    tilde_transform,
    v_qq,
    v_xq_continuous,
    v_xq_discrete,
)

from conftest import random_discrete_hmm, random_gaussian_hmm


def sym_kernel(a, b, lam):
    # 1-of-k RBF on symbols/states under the half-exponent convention
    return 1.0 if a == b else math.exp(-lam)


def naive_v_xq(theta, xa, xb, lam):
    """Direct double sum over (timestep, timestep) clique pairs."""
    ga = forward_backward(theta, xa).gamma
    gb = forward_backward(theta, xb).gamma
    n = theta.n_states
    total = 0.0
    for s, a in enumerate(xa):
        for t, b in enumerate(xb):
            for i in range(n):
                for j in range(n):
                    total += (
                        ga[s, i]
                        * gb[t, j]
                        * sym_kernel(a, b, lam)
                        * sym_kernel(i, j, lam)
                    )
    return total / (len(xa) * len(xb))


def naive_v_qq(theta, xa, xb, lam):
    """Direct double sum over transition-clique pairs."""
    pa = forward_backward(theta, xa)
    pb = forward_backward(theta, xb)
    xia = pa.xi.mean(axis=0)
    xib = pb.xi.mean(axis=0)
    n = theta.n_states
    total = 0.0
    for i in range(n):
        for j in range(n):
            for i2 in range(n):
                for j2 in range(n):
                    total += (
                        xia[i, j]
                        * xib[i2, j2]
                        * sym_kernel(i, i2, lam)
                        * sym_kernel(j, j2, lam)
                    )
    return total


class TestFeatures:
    def test_one_state(self):
        theta = Hmm(pi=[1.0], A=[[1.0]], emissions=(DiscreteDist([0.5, 0.5]),))
        f = lmmk_features(theta, [0, 1, 1, 0, 1])
        assert f.gamma_by_symbol[0, 0] == pytest.approx(2.0)
        assert f.gamma_by_symbol[1, 0] == pytest.approx(3.0)
        assert f.xi_avg == pytest.approx(np.array([[1.0]]))

    def test_deterministic_emissions(self):
        theta = Hmm(
            pi=[0.5, 0.5],
            A=[[0.5, 0.5], [0.5, 0.5]],
            emissions=(DiscreteDist([1.0, 0.0]), DiscreteDist([0.0, 1.0])),
        )
        f = lmmk_features(theta, [0, 0, 1])
        assert f.gamma_by_symbol == pytest.approx(np.array([[2.0, 0.0], [0.0, 1.0]]))

    def test_invariants(self, rng):
        theta = random_discrete_hmm(rng, 3, 2)
        x = rng.integers(0, 2, size=17)
        f = lmmk_features(theta, x)
        assert f.gamma_by_symbol.sum() == pytest.approx(17.0, abs=1e-8)
        assert f.xi_avg.sum() == pytest.approx(1.0, abs=1e-8)

    def test_matches_enumeration_aggregation(self, rng):
        theta = random_discrete_hmm(rng, 2, 2)
        x = rng.integers(0, 2, size=5)
        f = lmmk_features(theta, x)
        gamma, xi, _ = enum_posteriors(theta, x)
        by_symbol = np.zeros((2, 2))
        for t, sym in enumerate(x):
            by_symbol[sym] += gamma[t]
        assert np.abs(f.gamma_by_symbol - by_symbol).max() < 1e-10
        assert np.abs(f.xi_avg - xi.mean(axis=0)).max() < 1e-10


class TestVxqDiscrete:
    def test_lam_inf_keeps_diagonal_term(self, rng):
        theta = random_discrete_hmm(rng, 2, 2)
        xa = rng.integers(0, 2, size=6)
        xb = rng.integers(0, 2, size=4)
        f, g = lmmk_features(theta, xa), lmmk_features(theta, xb)
        got = v_xq_discrete(f, g, math.inf)
        expect = (f.gamma_by_symbol * g.gamma_by_symbol).sum() / (6 * 4)
        assert got == pytest.approx(expect, abs=1e-12)

    def test_lam_zero_collapses_to_one(self, rng):
        theta = random_discrete_hmm(rng, 3, 3)
        f = lmmk_features(theta, rng.integers(0, 3, size=8))
        g = lmmk_features(theta, rng.integers(0, 3, size=5))
        assert v_xq_discrete(f, g, 0.0) == pytest.approx(1.0, abs=1e-8)

    def test_matches_naive_clique_sum(self, rng):
        for _ in range(15):
            n = int(rng.integers(1, 4))
            k = int(rng.integers(2, 4))
            theta = random_discrete_hmm(rng, n, k)
            xa = rng.integers(0, k, size=int(rng.integers(2, 7)))
            xb = rng.integers(0, k, size=int(rng.integers(2, 7)))
            lam = float(rng.uniform(0.2, 3.0))
            f, g = lmmk_features(theta, xa), lmmk_features(theta, xb)
            assert v_xq_discrete(f, g, lam) == pytest.approx(
                naive_v_xq(theta, xa, xb, lam), abs=1e-10
            )

    def test_symmetry(self, rng):
        theta = random_discrete_hmm(rng, 2, 2)
        f = lmmk_features(theta, rng.integers(0, 2, size=9))
        g = lmmk_features(theta, rng.integers(0, 2, size=7))
        assert v_xq_discrete(f, g, 1.1) == pytest.approx(
            v_xq_discrete(g, f, 1.1), rel=1e-12
        )

    def test_inf_flag_equals_lam50(self, rng):
        theta = random_discrete_hmm(rng, 3, 2)
        f = lmmk_features(theta, rng.integers(0, 2, size=10))
        g = lmmk_features(theta, rng.integers(0, 2, size=10))
        assert abs(v_xq_discrete(f, g, math.inf) - v_xq_discrete(f, g, 50.0)) < 1e-18
        assert abs(v_qq(f, g, math.inf) - v_qq(f, g, 50.0)) < 1e-18


class TestVqq:
    def test_one_state(self, rng):
        theta = Hmm(pi=[1.0], A=[[1.0]], emissions=(DiscreteDist([0.5, 0.5]),))
        f = lmmk_features(theta, rng.integers(0, 2, size=6))
        g = lmmk_features(theta, rng.integers(0, 2, size=3))
        assert v_qq(f, g, 2.0) == pytest.approx(1.0)

    def test_lam_zero(self, rng):
        theta = random_discrete_hmm(rng, 3, 2)
        f = lmmk_features(theta, rng.integers(0, 2, size=6))
        g = lmmk_features(theta, rng.integers(0, 2, size=8))
        assert v_qq(f, g, 0.0) == pytest.approx(1.0, abs=1e-8)

    def test_matches_naive(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 4))
            theta = random_discrete_hmm(rng, n, 3)
            xa = rng.integers(0, 3, size=int(rng.integers(2, 7)))
            xb = rng.integers(0, 3, size=int(rng.integers(2, 7)))
            lam = float(rng.uniform(0.2, 3.0))
            f, g = lmmk_features(theta, xa), lmmk_features(theta, xb)
            assert v_qq(f, g, lam) == pytest.approx(
                naive_v_qq(theta, xa, xb, lam), abs=1e-10
            )


class TestVxqContinuous:
    def test_single_state_reduction(self, rng):
        # N = 1: gamma == 1, so value = (1 + exp(-lam)) * mean base kernel
        theta = random_gaussian_hmm(rng, 1, 1)
        xa = rng.standard_normal(5)
        xb = rng.standard_normal(4)
        lam = 0.9
        base = np.mean(
            [math.exp(-0.5 * lam * (a - b) ** 2) for a in xa for b in xb]
        )
        got = v_xq_continuous(theta, xa, xb, lam)
        assert got == pytest.approx((1 + math.exp(-lam)) * base, rel=1e-10)

    def test_lam_inf_first_term_only(self, rng):
        theta = random_gaussian_hmm(rng, 2, 1)
        xa = rng.standard_normal(4)
        xb = rng.standard_normal(4)
        # distinct reals: the indicator base kernel kills everything
        assert v_xq_continuous(theta, xa, xb, math.inf) == pytest.approx(0.0)
        # and a shared value keeps exactly the matching pair's state agreement
        xb2 = xb.copy()
        xb2[0] = xa[0]
        got = v_xq_continuous(theta, xa, xb2, math.inf)
        ga = forward_backward(theta, xa).gamma
        gb = forward_backward(theta, xb2).gamma
        assert got == pytest.approx(float(ga[0] @ gb[0]) / 16.0, rel=1e-10)

    def test_matches_termwise_explicit_expansion(self, rng):
        # build the explicit form inner products term by term
        theta = random_gaussian_hmm(rng, 2, 1)
        xa = rng.standard_normal(4)
        xb = rng.standard_normal(4)
        lam = 1.3
        ga = forward_backward(theta, xa).gamma
        gb = forward_backward(theta, xb).gamma
        base = np.array(
            [[math.exp(-0.5 * lam * (a - b) ** 2) for b in xb] for a in xa]
        )
        total = 0.0
        for i in range(2):
            total += float(ga[:, i] @ base @ gb[:, i])
            for j in range(2):
                total += math.exp(-lam) * float(ga[:, i] @ base @ gb[:, j])
        expect = total / 16.0
        assert v_xq_continuous(theta, xa, xb, lam) == pytest.approx(expect, abs=1e-10)

    def test_lmmk_dispatch(self, rng):
        theta_d = random_discrete_hmm(rng, 2, 2)
        xa = rng.integers(0, 2, size=6)
        xb = rng.integers(0, 2, size=5)
        f, g = lmmk_features(theta_d, xa), lmmk_features(theta_d, xb)
        assert lmmk(theta_d, xa, xb, 1.0) == pytest.approx(
            v_xq_discrete(f, g, 1.0) + v_qq(f, g, 1.0)
        )
        theta_c = random_gaussian_hmm(rng, 2, 1)
        ca = rng.standard_normal(5)
        cb = rng.standard_normal(6)
        assert np.isfinite(lmmk(theta_c, ca, cb, 1.0))


class TestTildeTransform:
    def test_unit_diagonal(self, rng):
        k = rng.standard_normal((5, 5))
        k = k @ k.T
        out = tilde_transform(k, TildeTransformConfig(0.7))
        assert np.abs(np.diag(out) - 1.0).max() < 1e-14

    def test_identity_like_gram(self):
        out = tilde_transform(np.eye(4), TildeTransformConfig(1.0))
        off = out[~np.eye(4, dtype=bool)]
        assert off == pytest.approx(math.exp(-2.0))

    def test_nu_zero_all_ones(self, rng):
        k = rng.standard_normal((4, 4))
        k = 0.5 * (k + k.T)
        assert tilde_transform(k, TildeTransformConfig(0.0)) == pytest.approx(
            np.ones((4, 4))
        )

    def test_asymmetric_rejected(self):
        k = np.array([[1.0, 0.5], [0.4, 1.0]])
        with pytest.raises(InvalidInputError):
            tilde_transform(k, TildeTransformConfig(1.0))

    def test_preserves_psd_on_lmmk_gram(self, rng):
        theta = random_discrete_hmm(rng, 2, 2)
        seqs = [rng.integers(0, 2, size=12) for _ in range(15)]
        feats = [lmmk_features(theta, s) for s in seqs]
        raw = np.array(
            [
                [v_xq_discrete(a, b, math.inf) + v_qq(a, b, math.inf) for b in feats]
                for a in feats
            ]
        )
        for nu in (0.1, 1.0, 10.0):
            out = tilde_transform(raw, TildeTransformConfig(nu))
            min_eig, ok = check_psd(out)
            assert ok, (nu, min_eig)
