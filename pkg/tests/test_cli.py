#!/usr/bin/env python3
"""
Command line tests: exit statuses, manifests, replay and a smoke-sized
end-to-end pipeline
"""

import json
from pathlib import Path

import pandas as pd
import pytest

import main as cli

SMOKE = str(Path(__file__).parent.parent / "data" / "configs" / "smoke.json")


def run(*argv) -> int:
    return cli.main([str(a) for a in argv])


@pytest.fixture
def generated(tmp_path):
    out = tmp_path / "data"
    assert run("gen-data", "--config", SMOKE, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-data -> train-autoencoder -> train-classifier -> adv-train, once per module"""
    root = tmp_path_factory.mktemp("pipeline")
    data, codec, standard, robust = (root / name for name in ("data", "codec", "standard", "robust"))
    assert run("gen-data", "--config", SMOKE, "--out", data) == 0
    assert run("train-autoencoder", "--config", SMOKE, "--out", codec, "--train", data / "train.jsonl") == 0
    assert run("train-classifier", "--config", SMOKE, "--out", standard, "--autoencoder",
               codec / "autoencoder.npz", "--train", data / "train.jsonl", "--test", data / "test.jsonl") == 0
    assert run("adv-train", "--config", SMOKE, "--out", robust, "--mode", "latent", "--alpha", "0.5",
               "--autoencoder", codec / "autoencoder.npz", "--train", data / "train.jsonl",
               "--test", data / "test.jsonl") == 0
    return {"root": root, "data": data, "codec": codec / "autoencoder.npz",
            "standard": standard / "classifiers" / "classifier_seed0.npz",
            "robust": robust / "classifiers" / "latent-a0.5_seed0.npz", "robust_dir": robust}


@pytest.mark.unit
class TestGenData:
    def test_writes_split_and_manifest(self, generated):
        print("[TEST] gen-data outputs")
        for name in ("dataset.jsonl", "train.jsonl", "test.jsonl", "manifest.json", "run.log"):
            assert (generated / name).exists(), name
        manifest = json.loads((generated / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["subcommand"] == "gen-data"
        assert manifest["config"]["corpus"]["bag_count"] == 60
        assert "train.jsonl" in manifest["outputs"]
        print("[OK] dataset, split and manifest written")

    def test_replay_reproduces_outputs(self, generated, tmp_path):
        replay = tmp_path / "replay"
        assert run("gen-data", "--config", generated / "manifest.json", "--out", replay) == 0
        for name in ("dataset.jsonl", "train.jsonl", "test.jsonl"):
            assert (replay / name).read_bytes() == (generated / name).read_bytes()

    def test_seed_flag_changes_corpus(self, generated, tmp_path):
        other = tmp_path / "other"
        assert run("gen-data", "--config", SMOKE, "--seed", "9", "--out", other) == 0
        assert (other / "dataset.jsonl").read_bytes() != (generated / "dataset.jsonl").read_bytes()

    def test_bad_config_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"corpus\": {\"bag_count\": -1}}", encoding="utf-8")
        assert run("gen-data", "--config", bad, "--out", tmp_path / "out") == 2
        assert run("gen-data", "--config", tmp_path / "absent.json", "--out", tmp_path / "out") == 2
        assert run("gen-data", "--config", SMOKE, "--set", "nonsense", "--out", tmp_path / "out") == 2


@pytest.mark.unit
class TestPrerequisites:
    def test_train_classifier_without_autoencoder(self, generated, tmp_path):
        assert run("train-classifier", "--config", SMOKE, "--out", tmp_path / "clf",
                   "--train", generated / "train.jsonl") == 1
        assert run("train-classifier", "--config", SMOKE, "--out", tmp_path / "clf",
                   "--autoencoder", tmp_path / "absent.npz", "--train", generated / "train.jsonl") == 1

    def test_adv_train_rejects_standard_mode(self, generated, tmp_path):
        assert run("adv-train", "--config", SMOKE, "--set", "adversarial.mode=\"standard\"",
                   "--out", tmp_path / "adv", "--train", generated / "train.jsonl") == 2

    def test_cross_eval_needs_two_models(self, tmp_path):
        assert run("cross-eval", "--config", SMOKE, "--out", tmp_path / "x", "--model", "a=a.npz") == 2

    def test_report_without_metrics(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert run("report", "--out", tmp_path / "report", empty) == 1


@pytest.mark.integration
class TestPipeline:
    def test_training_outputs(self, pipeline):
        robust = pipeline["robust_dir"]
        for name in ("adversarial_metrics.csv", "tradeoff.csv", "tradeoff.txt", "manifest.json"):
            assert (robust / name).exists(), name
        manifest = json.loads((robust / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["inputs"]["alpha"] == [0.5]
        assert pipeline["standard"].exists() and pipeline["robust"].exists()

    def test_attack_writes_tables_and_is_deterministic(self, pipeline, tmp_path):
        print("[TEST] attack subcommand")
        grid = "pgd:alpha=2,eps=10,t=3;pgd:alpha=0.5,eps=10,t=3,proj=l2;fgsm:delta=0.1,max_eps=1"
        outputs = []
        for name in ("first", "second"):
            out = tmp_path / name
            assert run("attack", "--config", SMOKE, "--out", out, "--autoencoder", pipeline["codec"],
                       "--classifier", pipeline["standard"], "--classifier", pipeline["robust"],
                       "--data", pipeline["data"] / "test.jsonl", "--grid", grid) == 0
            outputs.append(out)
        first, second = outputs
        table = pd.read_csv(first / "attack_summary.csv")
        assert len(table) == 3
        assert set(table["method"]) == {"PGD(alpha: 2.00, eps: 10.00, projection: linf)",
                                        "PGD(alpha: 0.50, eps: 10.00, projection: l2)",
                                        "FGSM(delta: 0.10, max_eps: 1.00)"}
        assert (first / "examples.txt").exists()
        assert (first / "traces" / "classifier_seed0" / "pgd_a2_e10_linf.jsonl").exists()
        for name in ("attack_summary.csv", "attack_summary_runs.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

        replay = tmp_path / "replay"
        assert run("attack", "--config", first / "manifest.json", "--out", replay) == 0
        assert (replay / "attack_summary.csv").read_bytes() == (first / "attack_summary.csv").read_bytes()
        print("[OK] summaries identical across runs and replay")

    def test_attack_on_empty_dataset(self, pipeline, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        assert run("attack", "--config", SMOKE, "--out", tmp_path / "a", "--autoencoder", pipeline["codec"],
                   "--classifier", pipeline["standard"], "--data", empty) == 1

    def test_attack_exits_1_when_traces_cannot_be_written(self, pipeline, tmp_path):
        out = tmp_path / "blocked"
        (out / "traces" / "classifier_seed0" / "pgd_a2_e10_linf.jsonl").mkdir(parents=True)
        assert run("attack", "--config", SMOKE, "--out", out, "--autoencoder", pipeline["codec"],
                   "--classifier", pipeline["standard"], "--data", pipeline["data"] / "test.jsonl",
                   "--grid", "pgd:alpha=2,eps=10,t=3") == 1
        assert not (out / "manifest.json").exists()

    def test_cross_eval_and_report(self, pipeline, tmp_path):
        cross = tmp_path / "cross"
        assert run("cross-eval", "--config", SMOKE, "--out", cross, "--autoencoder", pipeline["codec"],
                   "--model", f"standard={pipeline['standard']}", "--model", f"latent={pipeline['robust']}",
                   "--data", pipeline["data"] / "test.jsonl") == 0
        matrix = pd.read_csv(cross / "robustness_matrix.csv", index_col="attacker")
        assert list(matrix.index) == ["standard", "latent"]
        assert list(matrix.columns) == ["standard", "latent"]
        assert (cross / "standard_accuracy.csv").exists()

        report = tmp_path / "report"
        assert run("report", "--out", report, cross, pipeline["robust_dir"]) == 0
        assert (report / "robustness_matrix.csv").exists()
