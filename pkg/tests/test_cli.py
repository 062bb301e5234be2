"""Command-line interface: happy paths, fallbacks, and exit codes."""

import dataclasses
import json

import pytest

from sliceroute.datagen import TrafficConfig
from sliceroute.harness.cli import main
from sliceroute.harness.config import (
    ExperimentConfig,
    write_experiment_config,
    write_traffic_config,
)
from sliceroute.harness.evaluation import EvalReport

CLI_TRAFFIC = TrafficConfig(
    num_samples=260,
    num_intents=6,
    zipf_exponent=0.8,
    tail_intents=("intent_03", "intent_04"),
    vocab_size=120,
    num_skills=5,
    hypotheses_range=(2, 3),
    seed=21,
    name="clidata",
)

CLI_DIMS = dict(
    d=12, token_dim=5, lstm_hidden=4, device_dim=3, context_dim=3,
    intent_dim=5, skill_dim=3, feature_dim=3, hyp_dim=6,
)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Generated corpus + trained P checkpoint + eval report, all via the CLI."""
    root = tmp_path_factory.mktemp("cli")
    gen_cfg = root / "gen.cfg"
    write_traffic_config(CLI_TRAFFIC, gen_cfg)
    data_dir = root / "data"
    assert main(["generate", "--config", str(gen_cfg), "--out", str(data_dir)]) == 0

    dataset = data_dir / "clidata.jsonl"
    slices = root / "slices.txt"
    slices.write_text("intent_03\nintent_04\n", encoding="utf-8")

    exp = ExperimentConfig(
        model_kind="P",
        train_data=str(dataset),
        test_data=str(dataset),
        slices=str(slices),
        manifest=str(data_dir / "clidata.manifest.json"),
        epochs=1,
        batch_size=64,
        val_ratio=0.8,
        seed=3,
        **CLI_DIMS,
    )
    exp_cfg = root / "exp.cfg"
    write_experiment_config(exp, exp_cfg)
    run_dir = root / "p_run"
    assert main(["train", "--config", str(exp_cfg), "--out", str(run_dir)]) == 0

    eval_dir = root / "eval"
    assert (
        main(
            [
                "eval",
                "--checkpoint", str(run_dir / "checkpoint.npz"),
                "--config", str(exp_cfg),
                "--out", str(eval_dir),
            ]
        )
        == 0
    )
    return {
        "root": root,
        "gen_cfg": gen_cfg,
        "exp_cfg": exp_cfg,
        "dataset": dataset,
        "slices": slices,
        "run_dir": run_dir,
        "eval_report": eval_dir / "eval_report.json",
    }


class TestHappyPaths:
    def test_generate_outputs(self, workspace, capsys):
        assert workspace["dataset"].exists()
        manifest = json.loads((workspace["root"] / "data/clidata.manifest.json").read_text())
        assert manifest["sample_count"] == 260

    def test_train_outputs(self, workspace):
        assert (workspace["run_dir"] / "checkpoint.npz").exists()
        report = json.loads((workspace["run_dir"] / "train_report.json").read_text())
        assert report["model_kind"] == "P"

    def test_eval_report_readable(self, workspace):
        report = EvalReport.read(workspace["eval_report"])
        assert report.total == 260
        assert report.slice_names == ["base", "intent_03", "intent_04"]

    def test_eval_rerun_byte_identical(self, workspace, tmp_path):
        assert (
            main(
                [
                    "eval",
                    "--checkpoint", str(workspace["run_dir"] / "checkpoint.npz"),
                    "--data", str(workspace["dataset"]),
                    "--slices", str(workspace["slices"]),
                    "--out", str(tmp_path),
                ]
            )
            == 0
        )
        assert (tmp_path / "eval_report.json").read_bytes() == workspace["eval_report"].read_bytes()

    def test_self_compare_is_zero(self, workspace, tmp_path, capsys):
        code = main(
            [
                "compare",
                "--baseline", str(workspace["eval_report"]),
                "--out", str(tmp_path),
                str(workspace["eval_report"]),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "+0.00" in out
        table = json.loads((tmp_path / "comparison.json").read_text())
        assert table["rows"][0]["overall_delta_pp"] == 0.0

    def test_generate_seed_override(self, workspace, tmp_path):
        assert main(["generate", "--config", str(workspace["gen_cfg"]), "--seed", "99", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "clidata.jsonl").read_bytes() != workspace["dataset"].read_bytes()

    def test_out_dir_env_fallback(self, workspace, tmp_path, monkeypatch):
        monkeypatch.setenv("SLICEROUTE_OUT_DIR", str(tmp_path))
        assert (
            main(
                [
                    "eval",
                    "--checkpoint", str(workspace["run_dir"] / "checkpoint.npz"),
                    "--config", str(workspace["exp_cfg"]),
                    "--name", "env_report.json",
                ]
            )
            == 0
        )
        assert (tmp_path / "env_report.json").exists()


class TestExitCodes:
    def test_domain_error_returns_one(self, workspace, tmp_path, capsys):
        code = main(
            [
                "eval",
                "--checkpoint", str(tmp_path / "missing.npz"),
                "--data", str(workspace["dataset"]),
                "--slices", str(workspace["slices"]),
                "--out", str(tmp_path),
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_eval_without_data_returns_one(self, workspace, tmp_path, capsys):
        code = main(
            ["eval", "--checkpoint", str(workspace["run_dir"] / "checkpoint.npz"), "--out", str(tmp_path)]
        )
        assert code == 1
        assert "eval needs" in capsys.readouterr().err

    def test_bad_config_returns_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("gen.wrong_key=1\n", encoding="utf-8")
        assert main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == 1
        assert "unknown config key" in capsys.readouterr().err

    def test_usage_error_returns_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["train"])  # missing required --config
        assert exc.value.code == 2

    def test_unknown_subcommand_returns_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_compare_with_mismatched_reports_returns_one(self, workspace, tmp_path, capsys):
        report = EvalReport.read(workspace["eval_report"])
        other = dataclasses.replace(report, run_id="other", dataset_sha256="deadbeef")
        other_path = tmp_path / "other.json"
        other.write(other_path)
        code = main(
            [
                "compare",
                "--baseline", str(workspace["eval_report"]),
                "--out", str(tmp_path),
                str(workspace["eval_report"]),
                str(other_path),
            ]
        )
        assert code == 1
        assert "different test files" in capsys.readouterr().err
