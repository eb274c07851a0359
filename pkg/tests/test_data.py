import numpy as np
import pytest

from meanmap import InvalidInputError, stationary_distribution
from meanmap.data import (
    SYNTH_GENERATORS,
    balanced_subsample,
    import_ucr,
    load_labeled,
    load_sequences,
    minmax_params,
    minmax_scale,
    synth_dataset,
    write_labeled,
)


class TestSequenceIo:
    def test_discrete_roundtrip(self, tmp_path):
        path = tmp_path / "seqs.txt"
        path.write_text("0 1 1 0\n1 1\n")
        seqs = load_sequences(path, "discrete")
        assert [s.tolist() for s in seqs] == [[0, 1, 1, 0], [1, 1]]

    def test_labeled_roundtrip(self, tmp_path):
        path = tmp_path / "data.tsv"
        labels = ["a", "b"]
        seqs = [np.array([0.5, 1.5]), np.array([2.5])]
        write_labeled(path, labels, seqs, "continuous")
        l2, s2 = load_labeled(path, "continuous")
        assert l2 == labels
        assert all((a == b).all() for a, b in zip(s2, seqs))

    def test_bad_line_reports_lineno(self, tmp_path):
        path = tmp_path / "seqs.txt"
        path.write_text("0 1\n0 x 1\n")
        with pytest.raises(InvalidInputError, match=":2"):
            load_sequences(path, "discrete")

    def test_missing_tab_rejected(self, tmp_path):
        path = tmp_path / "data.tsv"
        path.write_text("a 0 1\n")
        with pytest.raises(InvalidInputError):
            load_labeled(path, "discrete")


class TestUcrImport:
    def test_comma_separated(self, tmp_path):
        path = tmp_path / "ucr.csv"
        path.write_text("1,0.5,0.25\n-1,1.0,2.0\n2.0000000e+00,3,4\n")
        labels, seqs = import_ucr(path)
        assert labels == ["1", "-1", "2"]
        assert seqs[0].tolist() == [0.5, 0.25]


class TestScaling:
    def test_minmax_to_unit_interval(self):
        seqs = [np.array([0.0, 5.0]), np.array([10.0])]
        lo, hi = minmax_params(seqs)
        assert (lo, hi) == (0.0, 10.0)
        scaled = minmax_scale(seqs, lo, hi)
        assert scaled[0].tolist() == [0.0, 0.5]
        assert scaled[1].tolist() == [1.0]

    def test_clipping_out_of_range(self):
        scaled = minmax_scale([np.array([-1.0, 11.0])], 0.0, 10.0)
        assert scaled[0].tolist() == [0.0, 1.0]


class TestBalancedSubsample:
    def test_balanced_counts(self, rng):
        labels = ["a"] * 30 + ["b"] * 20
        idx = balanced_subsample(labels, 20, seed=0)
        picked = [labels[i] for i in idx]
        assert picked.count("a") == 10 and picked.count("b") == 10

    def test_deterministic(self):
        labels = ["a"] * 10 + ["b"] * 10
        a = balanced_subsample(labels, 10, seed=3)
        b = balanced_subsample(labels, 10, seed=3)
        assert (a == b).all()

    def test_insufficient_class(self):
        with pytest.raises(InvalidInputError):
            balanced_subsample(["a", "a", "b"], 4, seed=0)


class TestSynthGenerators:
    def test_stationary_tv_separation(self):
        mixes = [
            stationary_distribution(g.A) @ g.emission_matrix()
            for g in SYNTH_GENERATORS
        ]
        tv = 0.5 * np.abs(mixes[0] - mixes[1]).sum()
        assert tv >= 0.15

    def test_dataset_counts_and_determinism(self):
        labels, seqs = synth_dataset(5, 30, seed=1)
        assert labels.count("0") == 5 and labels.count("1") == 5
        assert all(len(s) == 30 for s in seqs)
        labels2, seqs2 = synth_dataset(5, 30, seed=1)
        assert labels == labels2
        assert all((a == b).all() for a, b in zip(seqs, seqs2))

    def test_symbol_frequencies_near_stationary(self):
        labels, seqs = synth_dataset(40, 200, seed=2)
        for cls, gen in enumerate(SYNTH_GENERATORS):
            pooled = np.concatenate(
                [s for s, l in zip(seqs, labels) if l == str(cls)]
            )
            freq = np.bincount(pooled, minlength=2) / pooled.size
            target = stationary_distribution(gen.A) @ gen.emission_matrix()
            assert 0.5 * np.abs(freq - target).sum() < 0.02
