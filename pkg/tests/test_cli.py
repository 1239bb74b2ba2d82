import csv
import json
import subprocess
import sys

import pytest

from peaf.analog import default_frontend
from peaf.cli import build_parser, main
from peaf.features import FeatureMatrix
from peaf.filterbank import FilterbankConfig
from peaf.signal_io import synth_tone, write_wav

SMALL_RECIPE = {
    "duration": 0.25,
    "per_class": 6,
    "classes": {
        "low": {"kind": "tone", "freq": [450, 550], "noise": 0.005},
        "high": {"kind": "tone", "freq": [1900, 2100], "noise": 0.005},
    },
}

FLAGS = {
    "synth-data": ["--recipe", "--out", "--seed"],
    "extract": ["--feature", "--in", "--out", "--config"],
    "entropy-report": ["--manifest", "--pipelines", "--bins-value", "--bins-spatial", "--samples", "--out", "--seed"],
    "power": ["--feature", "--n-ops", "--classifier", "--task", "--out"],
    "train": ["--feature", "--manifest", "--config", "--epochs", "--learning-rate", "--out", "--seed"],
    "eval": ["--model", "--manifest", "--out", "--seed"],
    "optimize-frontend": ["--manifest", "--config", "--steps", "--learning-rate", "--out", "--seed"],
}


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "recipe.json").write_text(json.dumps(SMALL_RECIPE))
    assert main(["synth-data", "--recipe", str(root / "recipe.json"), "--out", str(root / "data"), "--seed", "4"]) == 0
    return root


def snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_synth_data_writes_manifest_and_log(corpus):
    rows = list(csv.reader(open(corpus / "data" / "manifest.csv")))
    assert rows[0] == ["path", "label"]
    assert len(rows) == 13
    log = json.loads((corpus / "data" / "manifest.csv.run.json").read_text())
    assert log["command"] == "synth-data"
    assert log["recipe"] == SMALL_RECIPE


def test_extract_l_peaf(tmp_path, capsys):
    write_wav(tmp_path / "tone.wav", synth_tone(1000, 0.5, 0.5))
    code = main(["extract", "--feature", "l-peaf", "--in", str(tmp_path / "tone.wav"), "--out", str(tmp_path / "feat.csv")])
    assert code == 0
    feat = FeatureMatrix.from_csv(tmp_path / "feat.csv")
    assert feat.values.shape == (16, 50)
    assert feat.stage_tag == "spike_count"
    assert json.loads((tmp_path / "feat.json").read_text())["frame_hop"] == 160
    assert (tmp_path / "feat.csv.run.json").exists()
    assert "16 x 50" in capsys.readouterr().out


def test_extract_mfcc_with_config(tmp_path):
    write_wav(tmp_path / "t.wav", synth_tone(300, 0.3, 0.5))
    (tmp_path / "m.json").write_text(json.dumps({"n_mels": 24, "n_coeffs": 13}))
    args = ["extract", "--feature", "mfcc", "--in", str(tmp_path / "t.wav"), "--out", str(tmp_path / "f.csv")]
    assert main(args + ["--config", str(tmp_path / "m.json")]) == 0
    assert FeatureMatrix.from_csv(tmp_path / "f.csv").n_channels == 13


def test_power_single(capsys):
    assert main(["power", "--feature", "n-peaf", "--n-ops", "413600", "--task", "wwd"]) == 0
    out = capsys.readouterr().out
    assert "P_tot = 0.1853 uW" in out
    assert out.splitlines()[0] == "feature,classifier,task,P_feat_uW,P_class_uW,P_tot_uW"


def test_power_table_file(tmp_path):
    assert main(["power", "--out", str(tmp_path / "p.csv")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert {r["feature"] for r in rows} == {"MFCC_WITH_ADC", "N_PEAF", "L_PEAF", "LEARN_PEAF"}
    assert json.loads((tmp_path / "p.csv.run.json").read_text())["e_eff"] == 36.5e12


def test_train_and_eval(corpus, tmp_path):
    m = str(corpus / "data" / "manifest.csv")
    model = str(tmp_path / "model.json")
    assert main(["train", "--feature", "l-peaf", "--manifest", m, "--epochs", "30", "--out", model]) == 0
    report = json.loads((tmp_path / "model.json.report.json").read_text())
    assert report["train_accuracy"] == 1.0
    assert main(["eval", "--model", model, "--manifest", m, "--out", str(tmp_path / "scores.csv")]) == 0
    metrics = json.loads((tmp_path / "scores.csv.metrics.json").read_text())
    assert metrics["accuracy"] == 1.0 and metrics["auc"] == 1.0
    assert (tmp_path / "scores.csv.roc.csv").read_text().startswith("fpr,tpr\n")


def test_optimize_frontend(corpus, tmp_path):
    fb = FilterbankConfig(n_channels=2, center_freqs=(700.0, 3000.0))
    default_frontend("learn-peaf", filterbank=fb).save(tmp_path / "init.json")
    out = tmp_path / "opt.json"
    args = ["optimize-frontend", "--manifest", str(corpus / "data" / "manifest.csv")]
    assert main(args + ["--config", str(tmp_path / "init.json"), "--steps", "2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["variant"] == "LEARN_PEAF"
    lines = (tmp_path / "opt.history.csv").read_text().splitlines()
    assert lines[0] == "step,loss" and len(lines) == 4


class TestDeterminism:
    def _twice(self, argv, root):
        assert main(argv) == 0
        first = snapshot(root)
        assert main(argv) == 0
        assert snapshot(root) == first
        return first

    def test_entropy_report(self, corpus, tmp_path):
        argv = ["entropy-report", "--manifest", str(corpus / "data" / "manifest.csv"), "--pipelines", "l-peaf,mfcc",
                "--seed", "1", "--samples", "6", "--out", str(tmp_path / "e.csv")]
        files = self._twice(argv, tmp_path)
        assert "e.csv" in files and "e.csv.run.json" in files

    def test_synth_data(self, tmp_path):
        (tmp_path / "r.json").write_text(json.dumps(SMALL_RECIPE))
        self._twice(["synth-data", "--recipe", str(tmp_path / "r.json"), "--out", str(tmp_path / "d"), "--seed", "9"], tmp_path)

    def test_train(self, corpus, tmp_path):
        m = str(corpus / "data" / "manifest.csv")
        self._twice(["train", "--feature", "n-peaf", "--manifest", m, "--epochs", "3", "--out", str(tmp_path / "m.json")], tmp_path)


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["power", "--bogus"])
        assert exc.value.code == 2

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["fly"])
        assert exc.value.code == 2

    def test_missing_input(self, tmp_path, capsys):
        code = main(["extract", "--feature", "l-peaf", "--in", str(tmp_path / "no.wav"), "--out", str(tmp_path / "o.csv")])
        assert code == 4
        assert "missing input" in capsys.readouterr().err

    def test_invalid_config(self, tmp_path, capsys):
        write_wav(tmp_path / "t.wav", synth_tone(300, 0.1, 0.5))
        (tmp_path / "bad.json").write_text('{"variant": "L_PEAF", "filterbank": {"n_channels": 0}}')
        argv = ["extract", "--feature", "l-peaf", "--in", str(tmp_path / "t.wav"), "--out", str(tmp_path / "o.csv"),
                "--config", str(tmp_path / "bad.json")]
        assert main(argv) == 3
        assert "invalid configuration" in capsys.readouterr().err

    def test_invalid_pipeline(self, corpus, tmp_path, capsys):
        argv = ["entropy-report", "--manifest", str(corpus / "data" / "manifest.csv"), "--pipelines", "leaf",
                "--out", str(tmp_path / "e.csv")]
        assert main(argv) == 3

    def test_bad_wav(self, tmp_path, capsys):
        (tmp_path / "x.wav").write_bytes(b"not a wav file")
        assert main(["extract", "--feature", "mfcc", "--in", str(tmp_path / "x.wav"), "--out", str(tmp_path / "o.csv")]) == 3


@pytest.mark.parametrize("command", sorted(FLAGS))
def test_help_lists_flags(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in FLAGS[command]:
        assert flag in text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "peaf.cli", "power", "--feature", "l-peaf", "--n-ops", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "P_tot = 0.3800 uW" in proc.stdout


def test_parser_has_all_subcommands():
    sub = next(a for a in build_parser()._actions if a.dest == "command")
    assert set(sub.choices) == set(FLAGS)
