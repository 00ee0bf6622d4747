import json
from pathlib import Path

import numpy as np
import pytest

from galleryscope.cli import run_subcommand
from galleryscope.data import load_manifest
from galleryscope.training import load_checkpoint

MINI_CONFIG = {
    "seed": 5,
    "gallery": {"instances": 3, "kind_mix": "planar", "image_size": 48,
                "views_per_instance": 2, "n_background": 2, "n_distractor": 0},
    "visit": {"pattern": "linear-route", "dwell_min": 2, "dwell_max": 3,
              "capture_interval_steps": 2, "n_splits": 2, "frame_size": 48},
    "degradations": {"sp_noise_density": 0.01},
    "network": {"input_hw": [32, 32]},
    "augment": {"crop_fraction": 1.0, "crops": ["center"], "hflip": True,
                "rotation_degrees": [0.0], "contrast_factors": [1.0]},
    "hyper_grid": [{"lr": 0.02, "momentum": 0.9, "batch_size": 16, "epochs": 2}],
    "pretrain": {"images": 80, "epochs": 1, "lr": 0.01, "batch_size": 16, "seed": 1},
    "k_max": 5,
}


def write_config(tmp_path, **overrides):
    cfg = json.loads(json.dumps(MINI_CONFIG))
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def test_gen_gallery_and_manifest_loads_back(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert run_subcommand(["gen-gallery", "--out", str(out), "--config", str(cfg)]) == 0
    manifest = load_manifest(out / "manifests" / "manifest.json")
    assert len(manifest.instances) == 3
    for t in manifest.training_images:
        assert (manifest.root / t.path).is_file()


def test_gen_gallery_zero_instances_fails(tmp_path, capsys):
    out = tmp_path / "run"
    code = run_subcommand(["gen-gallery", "--out", str(out), "--instances", "0"])
    assert code != 0
    assert "n_instances" in capsys.readouterr().err


def test_unknown_flag_nonzero_exit(tmp_path):
    assert run_subcommand(["gen-gallery", "--out", str(tmp_path), "--bogus"]) != 0


def test_unknown_subcommand_nonzero_exit():
    assert run_subcommand(["paint-the-walls"]) != 0


def test_missing_input_file_distinct_error(tmp_path, capsys):
    code = run_subcommand(["finetune", "--out", str(tmp_path / "nope")])
    assert code == 1
    err = capsys.readouterr().err
    assert "not found" in err


def test_full_run_pipeline_and_artifact_loop(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    code = run_subcommand(["full-run", "--out", str(out), "--config", str(cfg)])
    assert code == 0, capsys.readouterr().err

    # every artifact the pipeline wrote is re-readable by its loader
    manifest = load_manifest(out / "manifests" / "manifest.json")
    assert sorted(manifest.splits) == ["sp1", "sp2"]
    for name in ("pretrained", "finetuned_sp1", "finetuned_sp2"):
        ck = load_checkpoint(out / "checkpoints" / f"{name}.gsck")
        assert ck.params
    report = json.loads((out / "reports" / "eval_report.json").read_text())
    assert set(report["splits"]) == {"sp1", "sp2"}
    for curve in report["splits"].values():
        assert len(curve) == 5
        assert all(curve[i + 1] >= curve[i] for i in range(len(curve) - 1))
    assert (out / "reports" / "eval_report.csv").is_file()
    assert (out / "reports" / "eval_report.svg").is_file()
    assert (out / "reports" / "selection_log.json").is_file()
    effects = (out / "reports" / "effects_sp1.jsonl").read_text().splitlines()
    assert len(effects) == len(manifest.splits["sp1"])
    for line in effects:
        json.loads(line)


def test_evaluate_count_mismatch_diagnostic(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert run_subcommand(["full-run", "--out", str(out), "--config", str(cfg)]) == 0
    pred_path = out / "reports" / "predictions_sp1.json"
    raw = json.loads(pred_path.read_text())
    raw["predictions"] = raw["predictions"][:-1]  # drop one prediction
    pred_path.write_text(json.dumps(raw), encoding="utf-8")
    code = run_subcommand(["evaluate", "--out", str(out), "--config", str(cfg)])
    assert code == 1
    assert "1-1" in capsys.readouterr().err


def test_predict_missing_split_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert run_subcommand(["gen-gallery", "--out", str(out), "--config", str(cfg)]) == 0
    code = run_subcommand(["predict", "--out", str(out), "--config", str(cfg),
                           "--split", "sp9"])
    assert code == 1
    assert "sp9" in capsys.readouterr().err


def test_report_reemission_clean_overwrite(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert run_subcommand(["full-run", "--out", str(out), "--config", str(cfg)]) == 0
    svg = out / "reports" / "eval_report.svg"
    first = svg.read_bytes()
    assert run_subcommand(["report", "--out", str(out), "--config", str(cfg)]) == 0
    assert svg.read_bytes() == first
    assert not list(out.glob("reports/*.tmp"))  # no partial files left behind
