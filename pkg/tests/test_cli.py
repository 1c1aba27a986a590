import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from hsgp import errors
from hsgp.cli import (
    RunConfig,
    build_config,
    load_dataset,
    main,
    _dispatch,
    _parse_overrides,
    _sweep_values,
)
from hsgp.model_training import load_checkpoint


def write_config(path, **overrides):
    cfg = {
        "data_dir": str(path / "data"),
        "out_dir": str(path / "run"),
        "n_subjects": 10,
        "n_nodes": 8,
        "signal_length": 60,
        "subset_size": 3,
        "c_hidden": 4,
        "layers": 2,
        "batch_size": 4,
        "max_epochs": 3,
        "patience": 3,
        "seed": 7,
    }
    cfg.update(overrides)
    cfg_path = path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    return cfg_path


def invoke(*args):
    return CliRunner().invoke(main, list(args))


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    """One synth + train pipeline shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg_path = write_config(root)
    assert invoke("synth", "--config", str(cfg_path)).exit_code == 0
    result = invoke("train", "--config", str(cfg_path))
    assert result.exit_code == 0, result.output
    return root, cfg_path


class TestConfig:
    def test_defaults_round_trip_json(self, tmp_path):
        cfg = RunConfig()
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 3, "ratio": 0.25}))
        loaded = build_config(path)
        assert loaded.seed == 3
        assert loaded.ratio == 0.25
        assert loaded.task == cfg.task

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"learning_rate": 0.1}))
        with pytest.raises(errors.ConfigError, match="learning_rate"):
            build_config(path)

    def test_flag_overrides_beat_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 3}))
        cfg = build_config(path, {"seed": "9", "max_epochs": "12"})
        assert cfg.seed == 9
        assert cfg.max_epochs == 12

    def test_type_coercion(self):
        cfg = build_config(None, {
            "ratio": "0.3",
            "symmetrized_contrastive": "true",
            "mu1": "none",
            "mu2": "0.5",
        })
        assert cfg.ratio == 0.3
        assert cfg.symmetrized_contrastive is True
        assert cfg.mu1 is None
        assert cfg.mu2 == 0.5

    def test_bad_values_rejected(self):
        with pytest.raises(errors.ConfigError):
            build_config(None, {"max_epochs": "many"})
        with pytest.raises(errors.ConfigError):
            build_config(None, {"max_epochs": "2.5"})
        with pytest.raises(errors.ConfigError):
            build_config(None, {"symmetrized_contrastive": "maybe"})
        with pytest.raises(errors.ConfigError):
            build_config(None, {"task": "clustering"})

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(errors.MissingFile):
            build_config(tmp_path / "nope.json")

    def test_invalid_json_config(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        with pytest.raises(errors.ConfigError):
            build_config(path)

    def test_parse_overrides_forms(self):
        got = _parse_overrides(["--seed", "4", "--max-epochs=7"])
        assert got == {"seed": "4", "max_epochs": "7"}

    def test_parse_overrides_errors(self):
        with pytest.raises(errors.ConfigError):
            _parse_overrides(["seed", "4"])
        with pytest.raises(errors.ConfigError):
            _parse_overrides(["--seed"])

    def test_fold_bounds_checked(self):
        with pytest.raises(errors.ConfigError):
            RunConfig(fold=5, kfolds=5)
        with pytest.raises(errors.ConfigError):
            RunConfig(kfolds=1)


class TestSynth:
    def test_same_seed_same_directory_hash(self, tmp_path):
        digests = []
        for name in ("a", "b"):
            data_dir = tmp_path / name
            cfg_path = write_config(tmp_path, data_dir=str(data_dir))
            result = invoke("synth", "--config", str(cfg_path))
            assert result.exit_code == 0, result.output
            h = hashlib.sha256()
            for f in sorted(data_dir.iterdir()):
                if f.name != "resolved_config.json":
                    h.update(f.name.encode())
                    h.update(f.read_bytes())
            digests.append(h.hexdigest())
        assert digests[0] == digests[1]

    def test_dataset_is_reloadable(self, trained_run):
        root, cfg_path = trained_run
        cfg = build_config(cfg_path)
        subject_ids, bolds, targets = load_dataset(cfg)
        assert len(subject_ids) == 10
        assert all(b.data.shape == (8, 60) for b in bolds)
        assert set(targets) == {0, 1}

    def test_planted_manifest_written(self, trained_run):
        root, cfg_path = trained_run
        planted = json.loads((root / "data" / "planted.json").read_text())
        assert len(planted["planted_nodes"]) == 3
        assert planted["spec"]["n_subjects"] == 10


class TestAugmentCommand:
    def test_report_and_figure(self, trained_run, tmp_path):
        root, cfg_path = trained_run
        out = tmp_path / "aug"
        result = invoke("augment", "--config", str(cfg_path),
                        "--out_dir", str(out))
        assert result.exit_code == 0, result.output
        report = json.loads((out / "augment.json").read_text())
        assert report["n_pairs"] == 10
        assert report["window_size"] == 10
        assert -1.0 <= report["inter"] <= report["inner"] <= 1.0
        assert (out / "augment.png").stat().st_size > 0


class TestTrainCommand:
    def test_artifacts_present(self, trained_run):
        root, _ = trained_run
        run = root / "run"
        for name in ("checkpoint.json", "history.csv", "history.png",
                     "metrics.json", "predictions.csv", "eval.png",
                     "resolved_config.json"):
            assert (run / name).exists(), name

    def test_history_row_per_epoch(self, trained_run):
        root, _ = trained_run
        with open(root / "run" / "history.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3
        assert [int(r["epoch"]) for r in rows] == [0, 1, 2]
        metrics = json.loads((root / "run" / "metrics.json").read_text())
        assert metrics["epochs_run"] == 3
        vals = [float(r["val_loss"]) for r in rows]
        assert metrics["best_val_loss"] == min(vals)

    def test_resolved_config_reloads_identically(self, trained_run):
        root, cfg_path = trained_run
        original = build_config(cfg_path)
        resolved = build_config(root / "run" / "resolved_config.json")
        assert resolved == original

    def test_checkpoint_reloadable(self, trained_run):
        root, _ = trained_run
        params = load_checkpoint(root / "run" / "checkpoint.json")
        assert params.task == "classification"
        assert params.c_hidden == 4
        assert params.n_layers == 2

    def test_predictions_cover_test_fold(self, trained_run):
        root, _ = trained_run
        with open(root / "run" / "predictions.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert all(r["prediction"] in ("0", "1") for r in rows)


class TestEvalCommand:
    def test_val_metrics_match_training_report(self, trained_run, tmp_path):
        root, cfg_path = trained_run
        out = tmp_path / "eval"
        result = invoke("eval", "--config", str(cfg_path), "--split", "val",
                        "--out_dir", str(out),
                        "--checkpoint", str(root / "run" / "checkpoint.json"))
        assert result.exit_code == 0, result.output
        eval_metrics = json.loads((out / "metrics_val.json").read_text())
        train_metrics = json.loads((root / "run" / "metrics.json").read_text())
        assert eval_metrics["val"] == train_metrics["val"]

    def test_missing_checkpoint_is_data_error(self, trained_run, tmp_path):
        root, cfg_path = trained_run
        result = invoke("eval", "--config", str(cfg_path),
                        "--checkpoint", str(tmp_path / "ghost.json"),
                        "--out_dir", str(tmp_path / "out"))
        assert result.exit_code == 3
        payload = json.loads(result.output.strip().splitlines()[-1])
        assert payload["exit_code"] == 3


class TestSaliencyCommand:
    def test_per_class_maps(self, trained_run, tmp_path):
        root, cfg_path = trained_run
        out = tmp_path / "sal"
        result = invoke("saliency", "--config", str(cfg_path),
                        "--out_dir", str(out),
                        "--checkpoint", str(root / "run" / "checkpoint.json"))
        assert result.exit_code == 0, result.output
        for label in (0, 1):
            with open(out / f"saliency_class{label}.csv", newline="") as fh:
                rows = list(csv.DictReader(fh))
            assert len(rows) == 8
            norms = [float(r["normalized_score"]) for r in rows]
            assert min(norms) >= 0.0 and max(norms) <= 1.0
            summary = json.loads(
                (out / f"saliency_class{label}.json").read_text()
            )
            assert summary["target"] == label
            assert len(summary["top_k"]) == 8
            assert (out / f"saliency_class{label}.png").stat().st_size > 0


class TestSweepCommand:
    def test_window_grid_row_per_value(self, tmp_path):
        cfg_path = write_config(tmp_path, n_subjects=8, max_epochs=2,
                                signal_length=70)
        assert invoke("synth", "--config", str(cfg_path)).exit_code == 0
        out = tmp_path / "sweep"
        result = invoke("sweep", "--config", str(cfg_path),
                        "--param", "window_size",
                        "--values", "0,5,10,20,30,40,50",
                        "--out_dir", str(out))
        assert result.exit_code == 0, result.output
        with open(out / "sweep.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 7
        assert [int(r["window_size"]) for r in rows] == [0, 5, 10, 20, 30, 40, 50]
        assert all("val_accuracy" in r for r in rows)
        assert (out / "sweep.png").stat().st_size > 0
        for value in (0, 50):
            assert (out / f"window_size_{value}" / "checkpoint.json").exists()

    def test_rejects_unsweepable_param(self):
        with pytest.raises(errors.ConfigError):
            _sweep_values("seed", "1,2")

    def test_value_coercion_follows_field_type(self):
        assert _sweep_values("window_size", "0, 5") == [0, 5]
        assert _sweep_values("mu1", "0.5,1") == [0.5, 1.0]
        with pytest.raises(errors.ConfigError):
            _sweep_values("window_size", "0,,5")


class TestErrorReporting:
    def test_config_error_exit_2(self, tmp_path):
        cfg_path = write_config(tmp_path)
        result = invoke("train", "--config", str(cfg_path),
                        "--task", "clustering")
        assert result.exit_code == 2
        payload = json.loads(result.output.strip().splitlines()[-1])
        assert payload["error"] == "ConfigError"

    def test_missing_dataset_exit_3(self, tmp_path):
        cfg_path = write_config(tmp_path)
        result = invoke("train", "--config", str(cfg_path))
        assert result.exit_code == 3
        payload = json.loads(result.output.strip().splitlines()[-1])
        assert payload["error"] == "MissingFile"

    def test_numeric_error_exit_4(self, capsys):
        def boom(cfg):
            raise errors.NonFiniteParams("model diverged")

        with pytest.raises(SystemExit) as exc:
            _dispatch(boom, None, [])
        assert exc.value.code == 4
        payload = json.loads(capsys.readouterr().err.strip())
        assert payload["error"] == "NonFiniteParams"
        assert payload["exit_code"] == 4

    def test_label_out_of_range_exit_3(self, tmp_path):
        cfg_path = write_config(tmp_path, num_classes=2)
        assert invoke("synth", "--config", str(cfg_path),
                      "--num_classes", "3").exit_code == 0
        result = invoke("train", "--config", str(cfg_path))
        assert result.exit_code == 3
