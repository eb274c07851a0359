import math
from pathlib import Path

import numpy as np
import pytest

from meanmap.cli import main
from meanmap.serialize import read_cv_report, read_gram, read_model


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def synth_file(tmp_path):
    out = tmp_path / "synth.tsv"
    assert run("synth", "--num", 6, "--length", 40, "--seed", 3, "--out", out) == 0
    return out


@pytest.fixture
def models_dir(tmp_path, synth_file):
    out = tmp_path / "models"
    assert (
        run(
            "fit-hmms",
            "--data", synth_file,
            "--format", "labeled-discrete",
            "--states", 3,
            "--seed", 0,
            "--out", out,
        )
        == 0
    )
    return out


class TestSynth:
    def test_counts_and_determinism(self, tmp_path):
        a = tmp_path / "a.tsv"
        b = tmp_path / "b.tsv"
        run("synth", "--num", 4, "--length", 25, "--seed", 7, "--out", a)
        run("synth", "--num", 4, "--length", 25, "--seed", 7, "--out", b)
        assert a.read_bytes() == b.read_bytes()
        lines = [l for l in a.read_text().splitlines() if not l.startswith("#")]
        assert len(lines) == 8
        assert all(len(l.split("\t")[1].split()) == 25 for l in lines)

    def test_different_seed_differs(self, tmp_path):
        a = tmp_path / "a.tsv"
        b = tmp_path / "b.tsv"
        run("synth", "--num", 4, "--length", 25, "--seed", 1, "--out", a)
        run("synth", "--num", 4, "--length", 25, "--seed", 2, "--out", b)
        assert a.read_bytes() != b.read_bytes()


class TestFitHmms:
    def test_one_model_per_sequence(self, models_dir):
        files = sorted(models_dir.glob("*.txt"))
        assert len(files) == 12
        model, kv = read_model(files[0])
        assert model.n_states == 3
        assert kv["config_hash"] != "-"

    def test_rerun_skips(self, models_dir, synth_file, capsys):
        mtimes = {f: f.stat().st_mtime_ns for f in models_dir.glob("*.txt")}
        assert (
            run(
                "fit-hmms",
                "--data", synth_file,
                "--format", "labeled-discrete",
                "--states", 3,
                "--seed", 0,
                "--out", models_dir,
            )
            == 0
        )
        out = capsys.readouterr().out
        assert "skipped 12" in out
        assert {f: f.stat().st_mtime_ns for f in models_dir.glob("*.txt")} == mtimes

    def test_per_class(self, tmp_path, synth_file):
        out = tmp_path / "per_class"
        run(
            "fit-hmms",
            "--data", synth_file,
            "--format", "labeled-discrete",
            "--states", 3,
            "--per-class",
            "--out", out,
        )
        assert sorted(f.name for f in out.glob("*.txt")) == [
            "hmm_class_0.txt",
            "hmm_class_1.txt",
        ]

    def test_heuristic_state_policy(self, tmp_path):
        data = tmp_path / "d.tsv"
        seq = " ".join(str(v % 4) for v in range(100))
        data.write_text(f"x\t{seq}\n")
        out = tmp_path / "models"
        run("fit-hmms", "--data", data, "--states", "heuristic", "--out", out)
        model, _ = read_model(next(out.glob("*.txt")))
        # k=4, T=100, gamma=0.1 -> 3 states
        assert model.n_states == 3

    def test_too_short_sequence_reports_line(self, tmp_path, capsys):
        data = tmp_path / "d.tsv"
        data.write_text("a\t0 1 0 1 0 1\nb\t1 0\n")
        rc = run("fit-hmms", "--data", data, "--states", 3, "--out", tmp_path / "m")
        assert rc == 2
        assert "line 2" in capsys.readouterr().err


class TestGram:
    def test_gmmk_hmm_gram(self, tmp_path, models_dir):
        out = tmp_path / "gram.txt"
        rc = run(
            "gram",
            "--kernel", "gmmk-hmm",
            "--models", models_dir,
            "--lambda", 1.0,
            "--witness-T", 5,
            "--out", out,
        )
        assert rc == 0
        gram, kv = read_gram(out)
        assert gram.n == 12
        assert gram.params == {"lam": 1.0, "T": 5}

    def test_reload_bit_exact(self, tmp_path, models_dir):
        out = tmp_path / "gram.txt"
        run(
            "gram", "--kernel", "ppk", "--models", models_dir,
            "--witness-T", 4, "--out", out,
        )
        gram, _ = read_gram(out)
        out2 = tmp_path / "gram2.txt"
        run(
            "gram", "--kernel", "ppk", "--models", models_dir,
            "--witness-T", 4, "--out", out2,
        )
        assert out.read_bytes() == out2.read_bytes()

    def test_jobs_identical_output(self, tmp_path, models_dir):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        for out, jobs in ((a, 1), (b, 2)):
            run(
                "gram",
                "--kernel", "gmmk-hmm",
                "--models", models_dir,
                "--lambda", 0.5,
                "--witness-T", 3,
                "--jobs", jobs,
                "--out", out,
            )
        assert a.read_bytes() == b.read_bytes()

    def test_mixed_hashes_refused(self, tmp_path, models_dir, synth_file, capsys):
        # refit one sequence with a different seed into the same directory
        extra = tmp_path / "extra"
        run(
            "fit-hmms",
            "--data", synth_file,
            "--states", 3,
            "--seed", 99,
            "--out", extra,
        )
        (models_dir / "hmm_zzz.txt").write_text(next(extra.glob("*.txt")).read_text())
        rc = run(
            "gram",
            "--kernel", "gmmk-hmm",
            "--models", models_dir,
            "--lambda", 1.0,
            "--out", tmp_path / "g.txt",
        )
        assert rc == 2
        assert "mixed config hashes" in capsys.readouterr().err
        (models_dir / "hmm_zzz.txt").unlink()

    def test_lmmk_gram_with_theta(self, tmp_path, models_dir, synth_file):
        theta_dir = tmp_path / "theta"
        run(
            "fit-hmms",
            "--data", synth_file,
            "--states", 3,
            "--per-class",
            "--out", theta_dir,
        )
        out = tmp_path / "lmmk.txt"
        rc = run(
            "gram",
            "--kernel", "lmmk",
            "--data", synth_file,
            "--theta", theta_dir / "hmm_class_0.txt",
            "--nu", 1.0,
            "--out", out,
        )
        assert rc == 0
        gram, _ = read_gram(out)
        assert gram.kernel_id == "lmmk-tilde"
        assert np.abs(np.diag(gram.values) - 1.0).max() < 1e-12

    def test_emmk_gram(self, tmp_path, synth_file):
        out = tmp_path / "emmk.txt"
        rc = run(
            "gram",
            "--kernel", "emmk",
            "--data", synth_file,
            "--order", 2,
            "--lambda", "inf",
            "--out", out,
        )
        assert rc == 0
        gram, _ = read_gram(out)
        assert gram.params["order"] == 2


class TestClassify:
    def test_from_gram(self, tmp_path, models_dir, synth_file):
        gram_path = tmp_path / "gram.txt"
        run(
            "gram",
            "--kernel", "gmmk-hmm",
            "--models", models_dir,
            "--lambda", 1.0,
            "--witness-T", 5,
            "--out", gram_path,
        )
        labels_path = tmp_path / "labels.txt"
        lines = [
            l.split("\t")[0]
            for l in Path(synth_file).read_text().splitlines()
            if l and not l.startswith("#")
        ]
        labels_path.write_text("\n".join(lines) + "\n")
        report_path = tmp_path / "report.tsv"
        rc = run(
            "classify",
            "--gram", gram_path,
            "--labels", labels_path,
            "--folds", 3,
            "--c-grid", "1,10",
            "--out", report_path,
        )
        assert rc == 0
        report = read_cv_report(report_path)
        assert len(report.rows) == 2
        assert all(len(r.fold_errors) == 3 for r in report.rows)

    def test_from_dataset_deterministic(self, tmp_path, synth_file):
        a = tmp_path / "a.tsv"
        b = tmp_path / "b.tsv"
        for out, jobs in ((a, 1), (b, 2)):
            rc = run(
                "classify",
                "--data", synth_file,
                "--kernel", "gmmk-hmm",
                "--states", 3,
                "--lambda-grid", "1.0",
                "--witness-grid", "5",
                "--c-grid", "1,100",
                "--folds", 3,
                "--seed", 0,
                "--jobs", jobs,
                "--out", out,
            )
            assert rc == 0
        assert a.read_bytes() == b.read_bytes()

    def test_lmmk_pipeline(self, tmp_path, synth_file):
        out = tmp_path / "lmmk_report.tsv"
        rc = run(
            "classify",
            "--data", synth_file,
            "--kernel", "lmmk",
            "--theta-states", 3,
            "--nu-grid", "0.1,1",
            "--c-grid", "1,10",
            "--folds", 3,
            "--out", out,
        )
        assert rc == 0
        report = read_cv_report(out)
        assert len(report.rows) == 4

    def test_missing_inputs_exit_2(self, tmp_path):
        assert run("classify", "--out", tmp_path / "r.tsv") == 2


class TestKpcaCommand:
    def test_coordinate_table(self, tmp_path, models_dir):
        gram_path = tmp_path / "gram.txt"
        run(
            "gram",
            "--kernel", "gmmk-hmm",
            "--models", models_dir,
            "--lambda", 1.0,
            "--witness-T", 5,
            "--out", gram_path,
        )
        out = tmp_path / "coords.tsv"
        rc = run("kpca", "--gram", gram_path, "--components", 2, "--out", out)
        assert rc == 0
        rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert len(rows) == 12
        assert all(len(r.split("\t")) == 4 for r in rows)


class TestKdeFit:
    def make_table(self, tmp_path):
        rng = np.random.default_rng(0)
        lines = []
        for species, (center, group) in {
            "sp_a": (-3.0, "left"),
            "sp_b": (3.0, "right"),
        }.items():
            for v in center + 0.3 * rng.standard_normal(12):
                lines.append(f"{species}\t{group}\t{float(v)!r}")
        path = tmp_path / "features.tsv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_fits_one_kde_per_species(self, tmp_path):
        table = self.make_table(tmp_path)
        out = tmp_path / "kde"
        rc = run("kde-fit", "--data", table, "--bandwidths", "0.01,0.1,1", "--out", out)
        assert rc == 0
        files = sorted(out.glob("*.txt"))
        assert [f.name for f in files] == ["kde_sp_a.txt", "kde_sp_b.txt"]
        model, kv = read_model(files[0])
        assert model.num_centers == 12
        assert kv["label"] == "left"
        # tight cluster -> smallest grid bandwidth has best LOO-ISE
        assert model.bandwidth == pytest.approx(0.1, abs=0.2)

    def test_single_value_grid(self, tmp_path):
        table = self.make_table(tmp_path)
        out = tmp_path / "kde1"
        run("kde-fit", "--data", table, "--bandwidths", "0.5", "--out", out)
        model, _ = read_model(out / "kde_sp_a.txt")
        assert model.bandwidth == 0.5

    def test_too_few_points(self, tmp_path):
        path = tmp_path / "tiny.tsv"
        path.write_text("solo\tg\t1.0\n")
        assert run("kde-fit", "--data", path, "--out", tmp_path / "kde") == 2


class TestUcrImport:
    def test_import_scales(self, tmp_path):
        raw = tmp_path / "raw.csv"
        raw.write_text("1,0,10\n-1,5,5\n")
        out = tmp_path / "data.tsv"
        assert run("ucr-import", "--data", raw, "--out", out) == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0].split("\t")[0] == "1"
        vals = [float(t) for t in lines[0].split("\t")[1].split()]
        assert vals == [0.0, 1.0]


class TestVerify:
    def test_passes(self, capsys):
        assert run("verify", "--seed", 0) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out


def test_console_entry_point(tmp_path):
    import subprocess
    import sys

    out = tmp_path / "s.tsv"
    proc = subprocess.run(
        [sys.executable, "-m", "meanmap.cli", "synth", "--num", "2",
         "--length", "10", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
