import json
import subprocess
import sys

import numpy as np
import pytest

from zoneocr.cli import main
from zoneocr.raster import GrayImage, write_pgm_file


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def kv(out):
    """Parse key=value stdout; fails if any line is something else."""
    pairs = []
    for line in out.splitlines():
        fields = dict(tok.split("=", 1) for tok in line.split())
        assert fields, line
        pairs.append(fields)
    return pairs


@pytest.fixture(scope="module")
def features(small_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("feat") / "features.csv"
    assert main(["extract", "--data", str(small_corpus), "--out", str(out)]) == 0
    return out


class TestGen:
    def test_writes_corpus_and_manifest(self, tmp_path, capsys):
        code, out = run(capsys, "gen", "--out", tmp_path, "--classes", 2, "--samples", 3, "--seed", 5)
        assert code == 0
        assert kv(out) == [{"samples": "6"}, {"classes": "2"}]
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "gen" and manifest["seeds"]["seed"] == 5
        assert manifest["config"]["synth"]["master_seed"] == 5
        assert len(list((tmp_path / "class_1").glob("*.pgm"))) == 3

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"n_classes": 3, "samples_per_class": 2}')
        code, out = run(capsys, "gen", "--out", tmp_path / "c", "--config", cfg)
        assert code == 0 and kv(out)[0] == {"samples": "6"}

    def test_bad_config_is_usage_error(self, tmp_path, capsys):
        assert run(capsys, "gen", "--out", tmp_path, "--classes", 1)[0] == 2

    def test_missing_out(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["gen"])
        assert err.value.code == 2


class TestExtract:
    def test_outputs(self, features, small_corpus):
        text = features.read_text().splitlines()
        assert text[0].startswith("class_id,sample_id,f0,") and len(text) == 25
        assert features.with_name("features.csv.meta.json").is_file()
        assert features.with_name("features.csv.diagnostics.csv").read_text().startswith(
            "sample_id,threshold,specks_removed,clipped")
        manifest = json.loads(features.with_name("features.csv.manifest.json").read_text())
        assert manifest["inputs"] == [str(small_corpus)]

    def test_grid_2x2(self, small_corpus, tmp_path, capsys):
        code, out = run(capsys, "extract", "--data", small_corpus, "--out", tmp_path / "f.csv", "--grid", "2x2")
        assert code == 0 and kv(out) == [{"rows": "24"}, {"features": "4"}]
        assert (tmp_path / "f.csv").read_text().splitlines()[0] == "class_id,sample_id,f0,f1,f2,f3"

    def test_missing_data_dir(self, tmp_path, capsys):
        assert run(capsys, "extract", "--data", tmp_path / "nope", "--out", tmp_path / "f.csv")[0] == 1

    def test_bad_grid(self, small_corpus, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["extract", "--data", str(small_corpus), "--out", str(tmp_path / "f.csv"), "--grid", "4by4"])
        assert err.value.code == 2

    def test_bad_canvas(self, small_corpus, tmp_path, capsys):
        assert run(capsys, "extract", "--data", small_corpus, "--out", tmp_path / "f.csv", "--canvas", 0)[0] == 2


class TestEvaluateCommands:
    def test_eval_knn(self, features, tmp_path, capsys):
        code, out = run(capsys, "eval-knn", "--features", features, "--out", tmp_path / "r.json",
                        "--model-out", tmp_path / "m.knn")
        assert code == 0
        acc = float(kv(out)[0]["accuracy"])
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["overall_accuracy"] == acc
        assert report["counts"] == {"n_train": 16, "n_test": 8}
        assert (tmp_path / "m.knn").read_text().startswith("metric=euclidean\n")

    def test_eval_knn_bad_fraction(self, features, capsys):
        assert run(capsys, "eval-knn", "--features", features, "--train-frac", 1.5)[0] == 2

    def test_eval_knn_missing_features(self, tmp_path, capsys):
        assert run(capsys, "eval-knn", "--features", tmp_path / "none.csv")[0] == 1

    def test_eval_mlp(self, features, tmp_path, capsys):
        code, out = run(capsys, "eval-mlp", "--features", features, "--epochs", 3, "--h1", 6, "--h2", 5,
                        "--out", tmp_path / "r.json", "--model-out", tmp_path / "m.json",
                        "--trace-out", tmp_path / "t.csv")
        assert code == 0 and "accuracy" in kv(out)[0]
        model = json.loads((tmp_path / "m.json").read_text())
        assert model["layer_sizes"] == [16, 6, 5, 4] and model["grid"] == "4x4"
        assert len((tmp_path / "t.csv").read_text().splitlines()) == 4
        assert json.loads((tmp_path / "r.json.manifest.json").read_text())["config"]["hyperparams"]["epochs"] == 3

    def test_eval_mlp_bad_lr(self, features, capsys):
        assert run(capsys, "eval-mlp", "--features", features, "--lr", 0)[0] == 2

    def test_sweep_k(self, features, tmp_path, capsys):
        code, out = run(capsys, "sweep-k", "--features", features, "--ks", "1,3,5", "--out", tmp_path / "k.csv")
        assert code == 0
        assert [p["x"] for p in kv(out)] == ["1", "3", "5"]
        assert (tmp_path / "k.csv").read_text().startswith("x,accuracy,seconds\n")

    def test_sweep_k_unsorted(self, features, capsys):
        assert run(capsys, "sweep-k", "--features", features, "--ks", "5,1")[0] == 2

    def test_sweep_split(self, features, tmp_path, capsys):
        code, out = run(capsys, "sweep-split", "--features", features, "--fractions", "0.5,0.75", "--epochs", 2,
                        "--knn-out", tmp_path / "k.csv", "--mlp-out", tmp_path / "m.csv")
        assert code == 0
        assert [(p["model"], p["x"]) for p in kv(out)] == [
            ("knn", "0.5"), ("knn", "0.75"), ("mlp", "0.5"), ("mlp", "0.75")]
        assert len((tmp_path / "m.csv").read_text().splitlines()) == 3

    def test_sweep_split_timing_repeats(self, features, tmp_path, capsys):
        base = ["sweep-split", "--features", features, "--fractions", "0.5", "--epochs", 1,
                "--knn-out", tmp_path / "k.csv", "--mlp-out", tmp_path / "m.csv"]
        assert run(capsys, *base, "--timing-repeats", 2)[0] == 0
        assert run(capsys, *base, "--timing-repeats", 0)[0] == 2

    def test_sweep_epochs(self, features, tmp_path, capsys):
        code, out = run(capsys, "sweep-epochs", "--features", features, "--epoch-list", "1,4",
                        "--out", tmp_path / "e.csv", "--trace-out", tmp_path / "t.csv")
        assert code == 0 and [p["x"] for p in kv(out)] == ["1", "4"]
        assert len((tmp_path / "t.csv").read_text().splitlines()) == 5


@pytest.fixture(scope="module")
def models(features, tmp_path_factory):
    d = tmp_path_factory.mktemp("models")
    assert main(["eval-knn", "--features", str(features), "--out", str(d / "k.json"),
                 "--model-out", str(d / "m.knn")]) == 0
    assert main(["eval-mlp", "--features", str(features), "--epochs", "40", "--h1", "8", "--h2", "8",
                 "--out", str(d / "r.json"), "--model-out", str(d / "m.json"),
                 "--trace-out", str(d / "t.csv")]) == 0
    return d


class TestPredict:
    @pytest.mark.parametrize("name", ["m.knn", "m.json"])
    def test_known_sample(self, models, small_corpus, name, capsys):
        capsys.readouterr()
        code, out = run(capsys, "predict", "--model", models / name,
                        "--image", small_corpus / "class_2" / "c002_s0000.pgm")
        assert code == 0
        (fields,) = kv(out)
        assert set(fields) == {"class_id", "class_name"}
        assert fields["class_name"] == f"synth_{fields['class_id']}"
        if name == "m.knn":
            assert fields["class_id"] == "2"

    @pytest.mark.parametrize("name", ["m.knn", "m.json"])
    def test_blank_image(self, models, tmp_path, name, capsys):
        write_pgm_file(tmp_path / "blank.pgm", GrayImage(np.full((64, 64), 255, np.uint8)))
        capsys.readouterr()
        code, out = run(capsys, "predict", "--model", models / name, "--image", tmp_path / "blank.pgm")
        assert code == 0 and len(kv(out)) == 1

    def test_missing_model(self, tmp_path, capsys):
        write_pgm_file(tmp_path / "x.pgm", GrayImage(np.zeros((4, 4), np.uint8)))
        assert run(capsys, "predict", "--model", tmp_path / "none", "--image", tmp_path / "x.pgm")[0] == 1

    def test_bad_image(self, models, tmp_path, capsys):
        (tmp_path / "bad.pgm").write_bytes(b"P9 nonsense")
        assert run(capsys, "predict", "--model", models / "m.knn", "--image", tmp_path / "bad.pgm")[0] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "zoneocr", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.1.0"


def test_no_command_is_usage_error():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
