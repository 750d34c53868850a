"""End-to-end pipeline and CLI coverage on a small synthetic dataset."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from scanpathlab.cli import main
from scanpathlab.config import load_config
from scanpathlab.grid import load_scanpaths


def _tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = {
        "seed": 3,
        "features": {"channels": 8},
        "predictor": {"embed_dim": 8, "hidden_dim": 16, "lr": 1e-3, "epochs": 4, "batch_size": 8},
        "classifier": {"hidden_dim": 16, "lr": 1e-3, "epochs": 2, "batch_size": 8},
        "synth": {
            "n_images": 22,
            "readers": 2,
            "fixation_spread": 4.0,
            "split_fracs": [0.6363636363636364, 0.18181818181818182, 0.18181818181818182],
        },
        "data": {"dir": str(root / "data")},
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["gen-synth", "--config", str(cfg_path), "--out", str(root / "data")]) == 0
    return root, cfg_path


def test_cli_full_chain(workdir):
    root, cfg_path = workdir
    assert main(["train-predictor", "--config", str(cfg_path), "--out", str(root / "pred")]) == 0
    assert (root / "pred" / "manifest.json").is_file()

    assert (
        main(
            ["predict-scanpaths", "--config", str(cfg_path), "--ckpt", str(root / "pred"),
             "--out", str(root / "gen")]
        )
        == 0
    )
    generated = load_scanpaths(root / "gen" / "generated.jsonl")
    assert len(generated) == 22
    assert all(s.reader_id == "model" for s in generated)

    for variant, out in (("with", "cw"), ("without", "cwo")):
        args = ["train-classifier", "--config", str(cfg_path), "--out", str(root / out),
                "--variant", variant]
        if variant == "with":
            args += ["--scanpaths", str(root / "gen" / "generated.jsonl")]
        assert main(args) == 0

    assert (
        main(
            ["classify", "--config", str(cfg_path), "--ckpt", str(root / "cw"),
             "--out", str(root / "scores_w"), "--scanpaths", str(root / "gen" / "generated.jsonl")]
        )
        == 0
    )
    assert (
        main(
            ["classify", "--config", str(cfg_path), "--ckpt", str(root / "cwo"),
             "--out", str(root / "scores_wo")]
        )
        == 0
    )
    with open(root / "scores_w" / "scores.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["image_id"] + [f"c{i + 1:02d}" for i in range(14)]
    assert len(rows) == 5  # 4 test images + header

    assert (
        main(
            ["eval-classifier", "--config", str(cfg_path),
             "--with-scores", str(root / "scores_w" / "scores.csv"),
             "--without-scores", str(root / "scores_wo" / "scores.csv"),
             "--out", str(root / "eval_cls")]
        )
        == 0
    )
    summary = json.loads((root / "eval_cls" / "summary.json").read_text())
    for metric in ("auroc", "auprc"):
        for key in ("without_scanpath", "with_scanpath", "improvement_pct"):
            assert key in summary[metric]
    a, b = summary["auroc"]["without_scanpath"], summary["auroc"]["with_scanpath"]
    assert summary["auroc"]["improvement_pct"] == pytest.approx(100.0 * abs(a - b) / a)
    with open(root / "eval_cls" / "report.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["metric", "subset", "image_id", "value"]
    assert ["auroc", "test/without_scanpath", "", repr(a)] in rows

    assert (
        main(
            ["eval-scanpaths", "--config", str(cfg_path),
             "--generated", str(root / "gen" / "generated.jsonl"),
             "--out", str(root / "eval_sp")]
        )
        == 0
    )
    summary = json.loads((root / "eval_sp" / "summary.json").read_text())
    assert set(summary["set1"]) == {"model", "random", "radiologist"}
    assert set(summary["set2"]) == {"model", "random"}
    for method in summary["set1"]:
        assert set(summary["set1"][method]) == {
            "scanmatch", "mm_vector", "mm_direction", "mm_length", "mm_position",
        }
    with open(root / "eval_sp" / "report.csv") as fh:
        rows = list(csv.reader(fh))
    subsets = {r[1] for r in rows[1:]}
    assert {"set1/model", "set1/random", "set1/radiologist", "set2/model", "set2/random"} <= subsets


def test_config_hash_mismatch_rejected(workdir, capsys):
    root, cfg_path = workdir
    # same config but a different seed: the stored hash no longer matches
    rc = main(
        ["predict-scanpaths", "--config", str(cfg_path), "--seed", "999",
         "--ckpt", str(root / "pred"), "--out", str(root / "gen2")]
    )
    assert rc == 2
    assert "config_hash" in capsys.readouterr().err


def test_training_artifacts_reproducible(workdir):
    root, cfg_path = workdir
    out_a, out_b = root / "repro_a", root / "repro_b"
    for out in (out_a, out_b):
        assert main(["train-predictor", "--config", str(cfg_path), "--out", str(out)]) == 0
    a, b = _tree_bytes(out_a), _tree_bytes(out_b)
    assert a.keys() == b.keys()
    assert all(a[k] == b[k] for k in a)


def test_gradcheck_cli_smoke(capsys):
    assert main(["gradcheck", "--seeds", "1"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_missing_dataset_is_reported(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"data": {"dir": str(tmp_path / "nope")}}))
    rc = main(["train-predictor", "--config", str(cfg_path), "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "train-predictor" in capsys.readouterr().err
