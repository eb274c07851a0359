import numpy as np
import pytest

from meanmap import (
    DiscreteDist,
    GaussianDist,
    GaussianMixture,
    GramMatrix,
    InvalidInputError,
    KdeModel,
    LdsModel,
    LmmkFeatures,
    lmmk_features,
)
from meanmap.serialize import (
    config_hash,
    read_cv_report,
    read_gram,
    read_model,
    write_cv_report,
    write_gram,
    write_model,
)
from meanmap.learn import CvReport, CvRow

from conftest import random_discrete_hmm, random_gaussian_hmm


def roundtrip(tmp_path, model, name="m.txt"):
    path = tmp_path / name
    write_model(path, model, "abc123")
    loaded, kv = read_model(path)
    assert kv["config_hash"] == "abc123"
    return loaded


class TestModelRoundtrip:
    def test_discrete(self, tmp_path, rng):
        d = DiscreteDist(rng.dirichlet(np.ones(5)))
        loaded = roundtrip(tmp_path, d)
        assert (loaded.alpha == d.alpha).all()

    def test_gaussian(self, tmp_path, rng):
        a = rng.standard_normal((3, 3))
        g = GaussianDist(rng.standard_normal(3), a @ a.T + np.eye(3))
        loaded = roundtrip(tmp_path, g)
        assert (loaded.mu == g.mu).all()
        assert (loaded.sigma == g.sigma).all()

    def test_mixture(self, tmp_path, rng):
        mix = GaussianMixture(
            rng.dirichlet(np.ones(2)),
            (
                GaussianDist(rng.standard_normal(2), np.eye(2) * 0.7),
                GaussianDist(rng.standard_normal(2), np.eye(2) * 1.3),
            ),
        )
        loaded = roundtrip(tmp_path, mix)
        assert (loaded.weights == mix.weights).all()
        for a, b in zip(loaded.components, mix.components):
            assert (a.mu == b.mu).all() and (a.sigma == b.sigma).all()

    def test_kde(self, tmp_path, rng):
        kde = KdeModel(rng.standard_normal((4, 2)), 0.12345678901234567)
        loaded = roundtrip(tmp_path, kde)
        assert (loaded.centers == kde.centers).all()
        assert loaded.bandwidth == kde.bandwidth

    def test_lds(self, tmp_path, rng):
        lds = LdsModel(
            A=rng.standard_normal((2, 2)),
            C=rng.standard_normal((1, 2)),
            R=np.eye(1) * 0.3,
            mu0=rng.standard_normal(2),
            sigma0=np.eye(2),
        )
        loaded = roundtrip(tmp_path, lds)
        for field in ("A", "C", "R", "mu0", "sigma0"):
            assert (getattr(loaded, field) == getattr(lds, field)).all()

    def test_discrete_hmm(self, tmp_path, rng):
        hmm = random_discrete_hmm(rng, 3, 4)
        loaded = roundtrip(tmp_path, hmm)
        assert (loaded.pi == hmm.pi).all()
        assert (loaded.A == hmm.A).all()
        for a, b in zip(loaded.emissions, hmm.emissions):
            assert (a.alpha == b.alpha).all()

    def test_gaussian_hmm(self, tmp_path, rng):
        hmm = random_gaussian_hmm(rng, 2, 2, m=2)
        loaded = roundtrip(tmp_path, hmm)
        assert (loaded.pi == hmm.pi).all()
        for a, b in zip(loaded.emissions, hmm.emissions):
            assert (a.weights == b.weights).all()
            for ca, cb in zip(a.components, b.components):
                assert (ca.mu == cb.mu).all() and (ca.sigma == cb.sigma).all()

    def test_lmmk_features(self, tmp_path, rng):
        theta = random_discrete_hmm(rng, 2, 3)
        feats = lmmk_features(theta, rng.integers(0, 3, size=9))
        loaded = roundtrip(tmp_path, feats)
        assert isinstance(loaded, LmmkFeatures)
        assert (loaded.gamma_by_symbol == feats.gamma_by_symbol).all()
        assert (loaded.xi_avg == feats.xi_avg).all()
        assert loaded.seq_length == feats.seq_length

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("format: something-else v9\nkind: hmm\n")
        with pytest.raises(InvalidInputError):
            read_model(path)


class TestGramRoundtrip:
    def test_bit_exact(self, tmp_path, rng):
        vals = rng.standard_normal((4, 4))
        vals = vals @ vals.T
        gram = GramMatrix(vals, ("a", "b", "c", "d"), "gmmk-hmm", {"lam": 1.0, "T": 3})
        path = tmp_path / "g.txt"
        write_gram(path, gram, "deadbeef")
        loaded, kv = read_gram(path)
        assert (loaded.values == gram.values).all()
        assert loaded.example_ids == gram.example_ids
        assert loaded.kernel_id == "gmmk-hmm"
        assert loaded.params == {"lam": 1.0, "T": 3}
        assert kv["config_hash"] == "deadbeef"

    def test_checksum_detects_corruption(self, tmp_path, rng):
        vals = np.eye(3)
        gram = GramMatrix(vals, ("x", "y", "z"), "test")
        path = tmp_path / "g.txt"
        write_gram(path, gram)
        text = path.read_text().replace("1.0", "1.5", 1)
        path.write_text(text)
        with pytest.raises(InvalidInputError):
            read_gram(path)


class TestCvReport:
    def test_roundtrip(self, tmp_path):
        report = CvReport(
            rows=(
                CvRow("gmmk-hmm", {"lam": 1.0}, 0.1, (0.1, 0.2)),
                CvRow("gmmk-hmm", {"lam": 2.0}, 1.0, (0.0, 0.1)),
            ),
            folds=2,
            seed=5,
        )
        path = tmp_path / "r.tsv"
        write_cv_report(path, report, "cfg")
        loaded = read_cv_report(path)
        assert loaded.folds == 2
        assert loaded.seed == 5
        assert len(loaded.rows) == 2
        best = loaded.best
        assert best.params == {"lam": 2.0}
        assert best.mean_error == pytest.approx(0.05)

    def test_fold_times_grid_rows(self, tmp_path):
        report = CvReport(
            rows=tuple(
                CvRow("k", {"p": i}, 1.0, (0.1, 0.2, 0.3)) for i in range(4)
            ),
            folds=3,
            seed=0,
        )
        path = tmp_path / "r.tsv"
        write_cv_report(path, report)
        data_lines = [
            l
            for l in path.read_text().splitlines()
            if l and not l.startswith("#") and not l.startswith("summary")
        ]
        assert len(data_lines) == 4 * 3


def test_config_hash_stable_and_order_insensitive():
    a = config_hash({"x": 1, "y": [1, 2]})
    b = config_hash({"y": [1, 2], "x": 1})
    assert a == b
    assert config_hash({"x": 2}) != a
