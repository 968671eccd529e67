import csv
import json

import pytest
import yaml

from crossaug.cli import ConfigError, bundled_config, resolve_config, run

TINY = ["--set", "data.source=synthetic-pair", "--set", "data.rows_b=300", "--set", "experiment.grid=[300]",
        "--set", "experiment.folds=2", "--set", "experiment.variants=[baseline,ae]",
        "--set", "classifier.train.epochs=3", "--set", "mapping.train.epochs=2"]


def test_resolve_defaults_and_overrides():
    cfg = resolve_config({"experiment": {"folds": 3}}, ["mapping.train.epochs=7", "mask.side=B"])
    assert cfg["experiment"]["folds"] == 3
    assert cfg["mapping"]["train"]["epochs"] == 7
    assert cfg["mask"]["side"] == "B"
    assert cfg["mapping"]["train"]["batch_size"] == 32


@pytest.mark.parametrize("doc, key", [({"experiment": {"fold": 3}}, "experiment.fold"),
                                      ({"mapping": {"train": {"lr": 1}}}, "mapping.train.lr"),
                                      ({"extra": 1}, "extra")])
def test_unknown_keys_named(doc, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        resolve_config(doc)


def test_type_mismatch_rejected():
    with pytest.raises(ConfigError, match="experiment.folds"):
        resolve_config({"experiment": {"folds": "many"}})


def test_bundled_configs_resolve():
    for name in ("desk-mnist", "desk-tabular"):
        with open(bundled_config(name)) as f:
            resolve_config(yaml.safe_load(f))


def test_exit_codes(tmp_path, capsys):
    assert run(["experiment", "--nope"]) == 2
    assert run(["frobnicate"]) == 2
    assert run(["experiment", "--out", str(tmp_path / "x"), "--set", "experiment.foldz=2"]) == 2
    assert "experiment.foldz" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()
    bad = tmp_path / "bad.yaml"
    bad.write_text("data: [unclosed\n")
    assert run(["experiment", "--config", str(bad), "--out", str(tmp_path / "y")]) == 2
    assert run(["report", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "z")]) == 1


def test_experiment_replay_is_byte_identical(tmp_path):
    out1, out2 = tmp_path / "one", tmp_path / "two"
    assert run(["experiment", "--out", str(out1), *TINY]) == 0
    for name in ("report.csv", "report.svg", "timings.json", "resolved_config.yaml"):
        assert (out1 / name).exists()
    assert run(["experiment", "--config", str(out1 / "resolved_config.yaml"), "--out", str(out2)]) == 0
    assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()


def test_report_subcommand(tmp_path):
    run(["experiment", "--out", str(tmp_path / "e"), *TINY])
    assert run(["report", "--input", str(tmp_path / "e" / "report.csv"), "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "report.svg").read_text().count('class="xtick"') == 1


def test_gradcheck_subcommand(tmp_path, capsys):
    assert run(["gradcheck", "--seeds", "2", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 11 and all(line.endswith("ok") for line in lines)
    assert set(json.loads((tmp_path / "gradcheck.json").read_text())) >= {"dense", "vae"}


def _header(path):
    with open(path, newline="") as f:
        return next(csv.reader(f))


def test_pipeline_stage_subcommands(tmp_path):
    pair = ["--set", "data.source=synthetic-pair", "--set", "data.rows_b=200", "--set", "experiment.grid=[200]",
            "--set", "mapping.train.epochs=2"]
    assert run(["synth-pair", "--out", str(tmp_path / "s"), "--set", "data.rows_b=50"]) == 0
    assert (tmp_path / "s" / "seer.csv").exists()
    assert run(["fit-mapping", "--out", str(tmp_path / "m"), *pair]) == 0
    mapping = tmp_path / "m" / "mapping.json"
    assert run(["augment", "--out", str(tmp_path / "a"), "--mapping", str(mapping), *pair]) == 0
    assert len(_header(tmp_path / "a" / "augmented.csv")) == 120
    assert run(["augment", "--side", "B", "--out", str(tmp_path / "b"), *pair]) == 0
    assert len(_header(tmp_path / "b" / "augmented.csv")) == 120


def test_image_subcommands(tmp_path):
    img = ["--set", "data.rows=80", "--set", "mask.n=6", "--set", "mapping.train.epochs=1"]
    assert run(["mask-images", "--side", "B", "--out", str(tmp_path / "k"), *img]) == 0
    mask = json.loads((tmp_path / "k" / "mask.json").read_text())
    assert mask["side"] == "B" and mask["zeroed"] == list(range(11))
    assert run(["augment", "--out", str(tmp_path / "a"), *img]) == 0
    assert (tmp_path / "a" / "augmented-images.idx").exists()
    assert run(["mask-images", "--out", str(tmp_path / "t"), "--set", "data.source=synthetic-pair"]) == 2
