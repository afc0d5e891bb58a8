import csv
import gzip
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from _chain import SMALL_CONFIG, run_chain, write_config
from magforest.cli import DEFAULT_CONFIG, ConfigError, load_config, main
from magforest.metrics import read_ledger
from magforest.synth import POSITION_FEATURES

# Test DRMS of the default forest on synthetic flight 1002, frozen from the
# first run of this pipeline.
GOLDEN_TEST_DRMS = 9.324065471664651


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    root = tmp_path_factory.mktemp("chain")
    return root, run_chain(root)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_golden_position_run(tmp_path):
    cfg = write_config(tmp_path, {
        "inputs": ["run/flight_1002.csv"],
        "features": list(POSITION_FEATURES),
        "seed": 1002,
        "out": "run",
    })
    for command in ("synth", "train", "evaluate"):
        assert main([command, "--config", str(cfg)]) == 0
    results = read_ledger(tmp_path / "run" / "ledger.csv")
    test = [r for r in results if r.split == "test"]
    assert len(test) == 1 and test[0].metric == "drms_m"
    assert test[0].value == pytest.approx(GOLDEN_TEST_DRMS, rel=0.2)


class TestChain:
    def test_artifacts(self, chain):
        _, out = chain
        expected = {
            "flight_5.csv", "flight_5.truth.json", "flight_5_tl.csv", "scaler.json", "correlation.csv",
            "variance_report.csv", "selection.csv", "pca.json", "pca_scores.csv", "pca_variance.csv",
            "tl.json", "model.json.gz", "predictions.csv", "importance.csv", "tune.csv", "report.csv",
            "ledger.csv",
        }
        assert expected <= {p.name for p in out.iterdir()}

    def test_ledger_has_one_row_per_command_plus_results(self, chain):
        _, out = chain
        with open(out / "ledger.csv", newline="") as fh:
            commands = [row["command"] for row in csv.DictReader(fh)]
        assert commands[0] == "synth" and commands[-1] == "report"
        assert commands.count("evaluate") == 2

    def test_report_matches_ledger(self, chain):
        _, out = chain
        groups = {}
        for r in read_ledger(out / "ledger.csv"):
            groups.setdefault((r.model, r.split, r.metric), []).append(r.value)
        rows = read_csv(out / "report.csv")
        assert len(rows) == len(groups)
        for row in rows:
            values = np.array(groups[(row["model"], row["split"], row["metric"])])
            assert int(row["count"]) == values.size
            assert float(row["mean"]) == pytest.approx(values.mean(), rel=1e-12)
            if values.size >= 2:
                assert float(row["std"]) == pytest.approx(values.std(), abs=1e-12)
            else:
                assert row["std"] == ""

    def test_selection_respects_cap(self, chain):
        _, out = chain
        rows = read_csv(out / "selection.csv")
        assert 1 <= len(rows) <= SMALL_CONFIG["sfs"]["max_features"]

    def test_tune_marks_one_best(self, chain):
        _, out = chain
        rows = read_csv(out / "tune.csv")
        assert [int(r["max_depth"]) for r in rows] == [2, 6]
        assert sorted(r["best"] for r in rows) == ["0", "1"]

    def test_model_file_is_gzip_json(self, chain):
        _, out = chain
        doc = json.loads(gzip.decompress((out / "model.json.gz").read_bytes()))
        assert doc["format"] == "magforest" and doc["kind"] == "forest"
        assert doc["meta"]["feature_map"]["features"] == SMALL_CONFIG["features"]

    def test_plot(self, chain):
        root, out = chain
        assert main(["plot", "--config", str(root / "run.json")]) == 0
        pngs = sorted(p.name for p in out.glob("*.png"))
        assert "predictions.png" in pngs
        assert all((out / p).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n" for p in pngs)

    def test_evaluate_identical_files_is_zero(self, chain, capsys):
        root, out = chain
        truth = out / "flight_5.csv"
        code = main(["evaluate", "--config", str(root / "run.json"), "--pred", str(truth),
                     "--truth", str(truth), "--out", str(root / "ext")])
        assert code == 0
        assert "drms_m 0.0" in capsys.readouterr().out

    def test_corrupt_model_is_a_runtime_failure(self, chain, capsys):
        root, _ = chain
        bad = root / "bad.json"
        bad.write_text('{"format": "magforest", "version": 1, "kind": "forest", "body": {}}')
        code = main(["evaluate", "--config", str(root / "run.json"), "--model", str(bad),
                     "--out", str(root / "bad_out")])
        assert code == 1
        assert "malformed" in capsys.readouterr().err


class TestErrors:
    def test_missing_target_column(self, tmp_path, capsys):
        (tmp_path / "f.csv").write_text("a,b\n1,2\n3,4\n")
        cfg = write_config(tmp_path, {"inputs": ["f.csv"], "features": ["a"], "out": "o"})
        assert main(["train", "--config", str(cfg)]) == 2
        err = capsys.readouterr().err
        assert "utm_x" in err and "utm_z" in err

    def test_evaluate_pred_missing_columns(self, tmp_path, capsys):
        (tmp_path / "p.csv").write_text("utm_x\n1\n")
        (tmp_path / "t.csv").write_text("utm_x,utm_y,utm_z\n1,2,3\n")
        code = main(["evaluate", "--pred", str(tmp_path / "p.csv"), "--truth", str(tmp_path / "t.csv"),
                     "--out", str(tmp_path / "o")])
        assert code == 2
        assert "utm_y, utm_z" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"n_trees": 5})
        assert main(["train", "--config", str(cfg)]) == 2
        assert "n_trees" in capsys.readouterr().err

    def test_unknown_section_key(self, tmp_path):
        cfg = write_config(tmp_path, {"tune": {"grid": [1]}})
        assert main(["tune", "--config", str(cfg)]) == 2

    def test_unknown_subcommand(self):
        assert main(["fly"]) == 2

    def test_missing_input_file(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"inputs": ["nowhere.csv"], "out": "o"})
        assert main(["train", "--config", str(cfg)]) == 2
        assert "nowhere.csv" in capsys.readouterr().err

    def test_missing_model(self, tmp_path):
        (tmp_path / "f.csv").write_text("utm_x,utm_y,utm_z,a\n1,2,3,4\n")
        cfg = write_config(tmp_path, {"inputs": ["f.csv"], "features": ["a"], "out": "o"})
        assert main(["evaluate", "--config", str(cfg)]) == 2

    def test_target_equivalent_feature(self, tmp_path, capsys):
        (tmp_path / "f.csv").write_text("utm_x,utm_y,utm_z,ins_lat\n1,2,3,4\n5,6,7,8\n")
        cfg = write_config(tmp_path, {"inputs": ["f.csv"], "features": ["ins_lat"], "out": "o"})
        assert main(["train", "--config", str(cfg)]) == 2
        assert "ins_lat" in capsys.readouterr().err

    @pytest.mark.parametrize("bad", [
        {"seed": -1}, {"scaler": "robust"}, {"split": {"test_fraction": 1.0}},
        {"model": {"kind": "svm"}}, {"target": "velocity"}, {"importance": {"mode": "shap"}},
    ])
    def test_invalid_values(self, bad, tmp_path):
        cfg = write_config(tmp_path, bad)
        with pytest.raises(ConfigError):
            load_config(cfg)


class TestConfig:
    def test_defaults(self):
        cfg = load_config(None)
        assert cfg["model"] == DEFAULT_CONFIG["model"] and cfg["scaler"] == "minmax"

    def test_paths_resolve_against_config_directory(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"inputs": ["a.csv"], "out": "o"}))
        assert cfg["inputs"] == [str(tmp_path / "a.csv")]
        assert cfg["out"] == str(tmp_path / "o")

    def test_overrides_win(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"seed": 3}), {"seed": 4, "out": "x"})
        assert cfg["seed"] == 4 and cfg["out"] == "x"

    def test_sections_merge(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"tune": {"cv": 3}}))
        assert cfg["tune"]["cv"] == 3 and cfg["tune"]["param"] is None


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "magforest", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "synth" in proc.stdout and "evaluate" in proc.stdout
