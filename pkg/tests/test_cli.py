import json
import os

import numpy as np
import pytest

from riskchoice.cli import main


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = run([
        "simulate", "--out-dir", out, "--seed", "5", "--subjects", "24",
        "--n-pairs", "20", "--prior-sigma", "0.1",
    ])
    assert code == 0
    return out


class TestSimulate:
    def test_outputs_exist(self, sim_dir):
        assert (sim_dir / "pairs.csv").exists()
        assert (sim_dir / "choices.csv").exists()
        truth = json.loads((sim_dir / "truth.json").read_text())
        assert truth["n_subjects"] == 24
        assert truth["seed"] == 5
        assert len(truth["subject_params"]) == 24

    def test_default_scale(self, tmp_path):
        # default spec is 142 subjects x 91 pairs x 2 sessions; checked via a
        # fast ingest of the emitted files rather than re-deriving here
        out = tmp_path / "default"
        assert run(["simulate", "--out-dir", out, "--seed", "1", "--subjects", "6"]) == 0
        lines = (out / "choices.csv").read_text().splitlines()
        assert len(lines) == 2 + 6 * 91 * 2  # stamp + header + rows

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run([
                "simulate", "--out-dir", out, "--seed", "9", "--subjects", "8",
                "--n-pairs", "6",
            ]) == 0
        for name in ("pairs.csv", "choices.csv", "truth.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_invalid_spec_exit_2(self, tmp_path):
        assert run(["simulate", "--out-dir", tmp_path, "--subjects", "0"]) == 2


class TestIngest:
    def test_roundtrip_report(self, sim_dir, tmp_path):
        out = tmp_path / "ingest"
        code = run([
            "ingest", "--out-dir", out,
            "--pairs", sim_dir / "pairs.csv", "--choices", sim_dir / "choices.csv",
        ])
        assert code == 0
        report = json.loads((out / "ingest_report.json").read_text())
        assert report["n_pairs"] == 20
        assert report["n_subjects"] == 24
        assert report["completeness"] == 1.0
        assert report["sessions"] == [1, 2]

    def test_missing_file_exit_2(self, tmp_path):
        code = run([
            "ingest", "--out-dir", tmp_path, "--pairs", "/nonexistent.csv",
            "--choices", "/nonexistent2.csv",
        ])
        assert code == 2


class TestFit:
    def test_aggregate_qdt_report(self, sim_dir, tmp_path):
        out = tmp_path / "fit"
        code = run([
            "fit", "--out-dir", out, "--seed", "2",
            "--pairs", sim_dir / "pairs.csv", "--choices", sim_dir / "choices.csv",
            "--model", "qdt", "--level", "aggregate", "--session", "1",
            "--restarts", "4",
        ])
        assert code in (0, 1)
        report = json.loads((out / "fit_report.json").read_text())
        entry = report["models"]["qdt"]
        assert set(entry["params"]) == {"alpha", "lam", "delta", "gamma", "phi", "a", "eta", "wealth0"}
        assert entry["log_likelihood"] < 0
        assert report["config_hash"]

    def test_both_models_comparison_and_plotdata(self, sim_dir, tmp_path):
        out = tmp_path / "fit_both"
        code = run([
            "fit", "--out-dir", out, "--seed", "3",
            "--pairs", sim_dir / "pairs.csv", "--choices", sim_dir / "choices.csv",
            "--model", "both", "--level", "aggregate", "--restarts", "4",
        ])
        assert code in (0, 1)
        report = json.loads((out / "fit_report.json").read_text())
        comp = report["comparison"]
        assert comp["degrees_of_freedom"] == 2
        assert 0 <= comp["p_value"] <= 1
        rows = (out / "fit_pairs.csv").read_text().splitlines()
        assert rows[0].startswith("# seed=3")
        assert rows[1] == "pair_id,kind,observed_freq_b,predicted_cpt_b,predicted_qdt_b"
        assert len(rows) == 2 + 20

    def test_missing_input_exit_2(self, tmp_path):
        assert run([
            "fit", "--out-dir", tmp_path, "--pairs", "nope.csv", "--choices", "nope.csv",
        ]) == 2


class TestShiftAndCluster:
    def test_shift_outputs(self, tmp_path):
        sim = tmp_path / "simshift"
        assert run([
            "simulate", "--out-dir", sim, "--seed", "11", "--subjects", "60",
            "--n-pairs", "30", "--group-f", "0.73", "--group-alpha", "0.6",
            "--group-baseline", "uniform",
        ]) == 0
        out = tmp_path / "shift"
        code = run([
            "shift", "--out-dir", out, "--seed", "11", "--band-sims", "200",
            "--pairs", sim / "pairs.csv", "--choices", sim / "choices.csv",
        ])
        assert code in (0, 1)
        report = json.loads((out / "shift_report.json").read_text())
        assert 0 < report["majority_fraction"] < 1
        assert 0 <= report["shift_beta"] <= 2
        assert report["equal_group_offsets_at_half"]["p1"] == pytest.approx(0.25)
        curve = (out / "shift_curve.csv").read_text().splitlines()
        assert len(curve) == 2 + 30
        assert (out / "rss_grid.csv").exists()
        assert (out / "clusters.csv").exists()

    def test_single_session_rejected(self, tmp_path):
        sim = tmp_path / "sim1"
        assert run([
            "simulate", "--out-dir", sim, "--seed", "12", "--subjects", "12",
            "--n-pairs", "8", "--sessions", "1",
        ]) == 0
        assert run([
            "shift", "--out-dir", tmp_path / "out",
            "--pairs", sim / "pairs.csv", "--choices", sim / "choices.csv",
        ]) == 2

    def test_cluster_outputs(self, tmp_path):
        sim = tmp_path / "simc"
        assert run([
            "simulate", "--out-dir", sim, "--seed", "13", "--subjects", "40",
            "--n-pairs", "25", "--group-f", "0.7", "--group-alpha", "0.5",
            "--group-baseline", "uniform",
        ]) == 0
        out = tmp_path / "cluster"
        code = run([
            "cluster", "--out-dir", out, "--seed", "13",
            "--pairs", sim / "pairs.csv", "--choices", sim / "choices.csv",
        ])
        assert code in (0, 1)
        report = json.loads((out / "cluster_report.json").read_text())
        assert "homogeneity" in report
        rows = (out / "clusters.csv").read_text().splitlines()
        assert len(rows) == 2 + 40


class TestPredictability:
    def test_report_structure(self, tmp_path):
        sim = tmp_path / "simp"
        assert run([
            "simulate", "--out-dir", sim, "--seed", "17", "--subjects", "10",
            "--n-pairs", "15", "--prior-sigma", "0.08",
        ]) == 0
        out = tmp_path / "pred"
        code = run([
            "predictability", "--out-dir", out, "--seed", "17",
            "--pairs", sim / "pairs.csv", "--choices", sim / "choices.csv",
            "--model", "cpt", "--threshold", "0.85", "--restarts", "3",
        ])
        assert code in (0, 1)
        report = json.loads((out / "predictability_report.json").read_text())
        assert report["threshold"] == 0.85
        assert 0 <= report["ks"]["statistic"] <= 1
        assert 0 <= report["ks"]["p_value"] <= 1
        tail = (out / "tail_probs.csv").read_text().splitlines()
        assert tail[1].split(",")[0] == "subject_id"
        assert len(tail) == 2 + 10
        pmfs = (out / "subject_pmfs.csv").read_text().splitlines()
        assert len(pmfs) == 2 + 10 * 16


class TestPredict:
    def test_prediction_report(self, sim_dir, tmp_path):
        out = tmp_path / "predict"
        code = run([
            "predict", "--out-dir", out, "--seed", "4",
            "--pairs", sim_dir / "pairs.csv", "--choices", sim_dir / "choices.csv",
            "--model", "cpt", "--level", "aggregate", "--restarts", "3",
        ])
        assert code in (0, 1)
        report = json.loads((out / "prediction_report.json").read_text())
        entry = report["models"]["logit-cpt"]["aggregate"]
        assert entry["log_likelihood"] < 0
        assert entry["rss_all"] >= 0
        assert report["prediction_session"] == 2

    def test_requires_session2(self, tmp_path):
        sim = tmp_path / "sim1s"
        assert run([
            "simulate", "--out-dir", sim, "--seed", "6", "--subjects", "8",
            "--n-pairs", "6", "--sessions", "1",
        ]) == 0
        assert run([
            "predict", "--out-dir", tmp_path / "o",
            "--pairs", sim / "pairs.csv", "--choices", sim / "choices.csv",
        ]) == 2


class TestConfigPrecedence:
    def test_config_file_used_and_overridden(self, sim_dir, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({"subjects": 7, "n_pairs": 5}))
        out = tmp_path / "o1"
        assert run(["simulate", "--out-dir", out, "--seed", "2", "--config", cfgfile]) == 0
        truth = json.loads((out / "truth.json").read_text())
        assert truth["n_subjects"] == 7 and truth["n_pairs"] == 5
        out2 = tmp_path / "o2"
        assert run([
            "simulate", "--out-dir", out2, "--seed", "2", "--config", cfgfile,
            "--subjects", "9",
        ]) == 0
        truth2 = json.loads((out2 / "truth.json").read_text())
        assert truth2["n_subjects"] == 9 and truth2["n_pairs"] == 5

    def test_env_var_out_dir(self, tmp_path, monkeypatch):
        target = tmp_path / "envout"
        monkeypatch.setenv("RISKCHOICE_OUT", str(target))
        assert run(["simulate", "--seed", "3", "--subjects", "5", "--n-pairs", "4"]) == 0
        assert (target / "truth.json").exists()
