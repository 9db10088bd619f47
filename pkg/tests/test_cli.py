import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from qstbench import dataio
from qstbench.cli import main
from qstbench.measurement import uniform_record


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestExitCodes:
    def test_no_command(self, capsys):
        assert run() == 1

    def test_unknown_flag(self):
        assert run("gen-data", "--qubits", "1", "--count", "1", "--out", "x", "--bogus") == 1

    def test_bad_provenance(self, tmp_path, capsys):
        assert run("gen-data", "--qubits", "1", "--count", "1", "--provenance", "shots:-3",
                   "--out", tmp_path / "x") == 1
        assert "shots:K" in capsys.readouterr().err

    def test_missing_input_is_runtime_error(self, tmp_path):
        assert run("reconstruct", "--record", tmp_path / "none.json") == 2

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "qstbench", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "bench-shots" in proc.stdout


class TestGenDataAndTrain:
    def test_gen_data_deterministic(self, tmp_path, capsys):
        for name in ("a", "b"):
            assert run("gen-data", "--qubits", "2", "--count", "5", "--provenance", "shots:15",
                       "--seed", "3", "--out", tmp_path / name) == 0
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
        assert "seed: 3" in capsys.readouterr().out
        assert len(dataio.load_dataset(tmp_path / "a")) == 5

    def test_train_zero_epochs(self, tmp_path, capsys):
        run("gen-data", "--qubits", "1", "--count", "4", "--out", tmp_path / "t")
        run("gen-data", "--qubits", "1", "--count", "2", "--seed", "1", "--out", tmp_path / "v")
        assert run("train", "--train", tmp_path / "t", "--val", tmp_path / "v", "--epochs", "0",
                   "--out", tmp_path / "m.json") == 0
        model = dataio.load_model(tmp_path / "m.json")
        assert model.history == []
        assert model.config.epochs == 0

    def test_train_prints_epochs_and_hyperparameters(self, tmp_path, capsys):
        run("gen-data", "--qubits", "1", "--count", "8", "--out", tmp_path / "t")
        run("gen-data", "--qubits", "1", "--count", "2", "--seed", "1", "--out", tmp_path / "v")
        capsys.readouterr()
        assert run("train", "--train", tmp_path / "t", "--val", tmp_path / "v", "--epochs", "2",
                   "--dropout", "0.5", "--dense1", "10", "--out", tmp_path / "m.json") == 0
        out = capsys.readouterr().out.splitlines()
        assert "epoch,loss,val_fidelity" in out
        assert any(line.startswith("2,") for line in out)
        config = dataio.load_model(tmp_path / "m.json").config
        assert config.dropout_rate == 0.5 and config.dense1_units == 10

    def test_train_mismatched_dimensions(self, tmp_path, capsys):
        run("gen-data", "--qubits", "1", "--count", "4", "--out", tmp_path / "t")
        run("gen-data", "--qubits", "2", "--count", "2", "--out", tmp_path / "v")
        assert run("train", "--train", tmp_path / "t", "--val", tmp_path / "v",
                   "--out", tmp_path / "m.json") == 2
        assert "d=1" in capsys.readouterr().err
        assert not (tmp_path / "m.json").exists()


class TestReconstruct:
    def test_mle_on_maximally_mixed(self, tmp_path, capsys):
        dataio.save_record(uniform_record(2), tmp_path / "r.json")
        dataio.save_density(np.eye(4) / 4, tmp_path / "target.json")
        assert run("reconstruct", "--record", tmp_path / "r.json", "--method", "mle",
                   "--target", tmp_path / "target.json", "--out", tmp_path / "rho.json") == 0
        out = capsys.readouterr().out
        assert "real part:" in out and "imaginary part:" in out
        fid = float(out.split("fidelity:")[1].split()[0])
        assert fid >= 0.999
        np.testing.assert_allclose(dataio.load_density(tmp_path / "rho.json"), np.eye(4) / 4, atol=1e-3)

    def test_wrong_length_record(self, tmp_path, capsys):
        (tmp_path / "r.json").write_text(json.dumps(
            {"version": 1, "d": 2, "shots": "ideal", "values": [0.5] * 6}))
        assert run("reconstruct", "--record", tmp_path / "r.json") == 2
        assert "36" in capsys.readouterr().err

    def test_nn_needs_model(self, tmp_path):
        dataio.save_record(uniform_record(1), tmp_path / "r.json")
        assert run("reconstruct", "--record", tmp_path / "r.json", "--method", "nn") == 1

    def test_nn_dimension_mismatch(self, tmp_path):
        run("gen-data", "--qubits", "1", "--count", "2", "--out", tmp_path / "t")
        run("train", "--train", tmp_path / "t", "--val", tmp_path / "t", "--epochs", "0",
            "--out", tmp_path / "m.json")
        dataio.save_record(uniform_record(2), tmp_path / "r.json")
        assert run("reconstruct", "--record", tmp_path / "r.json", "--method", "nn",
                   "--model", tmp_path / "m.json") == 2


class TestBenchScaling:
    def test_missing_checkpoint_is_usage_error(self, tmp_path, capsys):
        assert run("bench-scaling", "--qubits", "1..2", "--out", tmp_path / "s.csv") == 1
        assert "d=1,2" in capsys.readouterr().err

    def test_inline_rows_and_epoch_times(self, tmp_path, capsys):
        assert run("bench-scaling", "--qubits", "1,3", "--train-inline", "--train-count", "40",
                   "--val-count", "4", "--epochs", "2", "--states", "20", "--seed", "2",
                   "--out", tmp_path / "s.csv") == 0
        rows = read_rows(tmp_path / "s.csv")
        assert len(rows) == 2 * 2 * 20
        assert {r["d"] for r in rows} == {"1", "3"}
        depol = [r for r in rows if r["shots"] != "ideal"]
        assert {r["shots"] for r in depol} == {"2192"}
        assert {r["noise_p"] for r in depol if r["d"] == "3"} == {"0.1"}
        summary = json.loads((tmp_path / "s.json").read_text())
        epoch = summary["train_seconds_per_epoch"]
        assert epoch["3"] > epoch["1"]

    def test_no_timing_is_reproducible(self, tmp_path):
        args = ["bench-scaling", "--qubits", "1", "--train-inline", "--train-count", "20",
                "--val-count", "2", "--epochs", "1", "--states", "3", "--no-timing"]
        run(*args, "--out", tmp_path / "a.csv")
        run(*args, "--out", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert {r["wall_time_s"] for r in read_rows(tmp_path / "a.csv")} == {"0.0"}

    @pytest.mark.slow
    def test_with_session_checkpoints(self, tmp_path, trained):
        for d in (1, 2):
            dataio.save_model(trained[f"d{d}_ideal"], tmp_path / f"m{d}.json")
        assert run("bench-scaling", "--qubits", "1..2", "--scenarios", "ideal",
                   "--checkpoint", f"1={tmp_path / 'm1.json'}", "--checkpoint", f"2={tmp_path / 'm2.json'}",
                   "--out", tmp_path / "s.csv") == 0
        rows = read_rows(tmp_path / "s.csv")
        for d in ("1", "2"):
            assert np.mean([float(r["fidelity"]) for r in rows if r["d"] == d]) >= 0.95

    def test_checkpoint_dimension_mismatch(self, tmp_path):
        run("gen-data", "--qubits", "1", "--count", "2", "--out", tmp_path / "t")
        run("train", "--train", tmp_path / "t", "--val", tmp_path / "t", "--epochs", "0",
            "--out", tmp_path / "m.json")
        assert run("bench-scaling", "--qubits", "2", "--checkpoint", f"2={tmp_path / 'm.json'}",
                   "--out", tmp_path / "s.csv") == 2


class TestBenchShots:
    def test_mle_only(self, tmp_path, capsys):
        assert run("bench-shots", "--methods", "mle", "--shots", "15,ideal", "--states", "2",
                   "--mle-restarts", "1", "--out", tmp_path / "r.csv") == 0
        rows = read_rows(tmp_path / "r.csv")
        assert len(rows) == 4
        noise = read_rows(tmp_path / "r_sqdiff.csv")
        assert len(noise) == 4
        ideal_noise = [float(r["squared_difference"]) for r in noise if r["shots"] == "ideal"]
        assert ideal_noise == [0.0, 0.0]
        assert "mean squared difference" in capsys.readouterr().out

    def test_unknown_method(self, tmp_path):
        assert run("bench-shots", "--methods", "svm", "--out", tmp_path / "r.csv") == 1

    def test_nn_without_source(self, tmp_path):
        assert run("bench-shots", "--methods", "nn-ideal", "--out", tmp_path / "r.csv") == 1

    def test_inline_nn(self, tmp_path):
        assert run("bench-shots", "--methods", "nn-shots:15", "--train-inline", "--train-count", "20",
                   "--val-count", "2", "--epochs", "1", "--shots", "5", "--states", "3",
                   "--out", tmp_path / "r.csv") == 0
        assert {r["method"] for r in read_rows(tmp_path / "r.csv")} == {"nn-shots:15"}
