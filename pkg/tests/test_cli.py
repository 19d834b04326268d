import json
import os

import pytest

from swagppm import cli


TINY = {
    "seed": 7,
    "data": {"synthetic": {"num_classes": 6, "total_records": 400,
                           "vocab_size": 300, "feature_dim": 256}},
    "phases": {"finetune_epochs": 2, "swag_epochs": 4, "draws": 20,
               "batch_size": 32},
    "dp_sgd": {"epochs": 3, "batch_size": 64},
    "nonprivate": {"epochs": 3},
    "delta_sweep": [0.1, 0.99],
}


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY))
    return str(path)


def run(args):
    return cli.main(args)


def test_generate_data(tmp_path, tiny_config_file, capsys):
    code = run(["--config", tiny_config_file, "--out", str(tmp_path / "o"),
                "generate-data"])
    assert code == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "gini" in out
    assert os.path.exists(tmp_path / "o" / "train_manifest.json")


def test_bad_config_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"bogus": 1}))
    assert run(["--config", str(path), "--out", str(tmp_path / "o"),
                "train"]) == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert run(["--config", str(tmp_path / "nope.json"),
                "train"]) == cli.EXIT_CONFIG


def test_train(tmp_path, tiny_config_file, capsys):
    code = run(["--config", tiny_config_file, "--out", str(tmp_path / "o"),
                "train"])
    assert code == cli.EXIT_OK
    assert "weighted F1" in capsys.readouterr().out
    assert os.path.exists(tmp_path / "o" / "model.bin")


def test_swag_ppm_subcommand(tmp_path, tiny_config_file, capsys):
    code = run(["--config", tiny_config_file, "--out", str(tmp_path / "o"),
                "swag-ppm"])
    assert code == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "epsilon" in out
    assert os.path.exists(tmp_path / "o" / "release" / "released_model.bin")
    assert os.path.exists(tmp_path / "o" / "privacy_report.json")


def test_dp_sgd_subcommand(tmp_path, tiny_config_file, capsys):
    code = run(["--config", tiny_config_file, "--out", str(tmp_path / "o"),
                "dp-sgd"])
    assert code == cli.EXIT_OK
    assert "sigma" in capsys.readouterr().out


def test_account_subcommand(tmp_path, tiny_config_file, capsys):
    code = run(["--config", tiny_config_file, "--out", str(tmp_path / "o"),
                "account"])
    assert code == cli.EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("delta,epsilon,order")
    assert os.path.exists(tmp_path / "o" / "frontier.csv")
    assert os.path.exists(tmp_path / "o" / "ledger.json")


def test_benchmark_and_report(tmp_path, tiny_config_file, capsys):
    out_dir = str(tmp_path / "o")
    code = run(["--config", tiny_config_file, "--out", out_dir, "benchmark"])
    assert code == cli.EXIT_OK
    capsys.readouterr()
    assert run(["--out", out_dir, "report"]) == cli.EXIT_OK
    assert "f1_weighted" in capsys.readouterr().out


def test_override_flag(tmp_path, tiny_config_file, capsys):
    code = run(["--config", tiny_config_file, "--out", str(tmp_path / "o"),
                "--override", "phases.draws=5", "--seed", "9",
                "generate-data"])
    assert code == cli.EXIT_OK


def test_report_without_benchmark(tmp_path):
    assert run(["--out", str(tmp_path / "none"),
                "report"]) == cli.EXIT_CONFIG
