"""Run configuration: defaults, file loading, validation and hashing.

Defaults carry the full-scale training settings; experiments override
them from a JSON file or programmatically.  Every artifact directory
embeds the effective config and its hash, and resuming against a
different config is rejected.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .errors import ContractViolation, FormatError
from .grid import grid_diagonal_half

DEFAULTS: dict = {
    "seed": 0,
    "grid": 16,
    "features": {
        "source": "files",  # "files" (TNSR per image) or "cnn" (PGM images)
        "channels": 128,
        "cnn_channels": [8, 16, 32, 64, 128],
        "image_size": 256,
    },
    "predictor": {
        "embed_dim": 256,
        "hidden_dim": 512,
        "lr": 1e-5,
        "epochs": 200,
        "batch_size": 16,
        "max_len": 64,
    },
    "classifier": {
        "hidden_dim": 256,
        "lr": 1e-4,
        "epochs": 25,
        "batch_size": 16,
        "lr_decay": 0.2,
        "lr_period": 6,
        "pool_grid": 16,
        "attention": True,
        "scanpath_source": "generated",  # generated | recorded | random
    },
    "scanmatch": {
        "threshold": grid_diagonal_half(),
        "gap": 0.0,
    },
    "random_baseline": {
        "length": 0,  # 0: use the mean training-scanpath length
    },
    "synth": {
        "n_images": 64,
        "n_conditions": 4,
        "channels": 8,
        "active_min": 1,
        "active_max": None,
        "fixations_per_region": 2,
        "blob_amplitude": 3.0,
        "blob_sigma": 0.7,
        "fixation_spread": 6.0,
        "scanpath_noise": 0.0,
        "cell_noise": 0.3,
        "offset_noise": 1.0,
        "uncertain_frac": 0.0,
        "readers": 1,
        "split_fracs": [0.8, 0.1, 0.1],
    },
    "data": {
        "dir": "",
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ContractViolation(f"unknown config key {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ContractViolation(f"config key {here!r} must be a table")
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _validate(cfg: dict) -> None:
    if cfg["grid"] != 16:
        raise ContractViolation("grid is fixed at 16")
    if cfg["features"]["source"] not in ("files", "cnn"):
        raise ContractViolation("features.source must be 'files' or 'cnn'")
    if cfg["classifier"]["pool_grid"] not in (8, 16):
        raise ContractViolation("classifier.pool_grid must be 8 or 16")
    if cfg["classifier"]["scanpath_source"] not in ("generated", "recorded", "random"):
        raise ContractViolation("classifier.scanpath_source must be generated, recorded or random")
    for section, key in (("predictor", "lr"), ("classifier", "lr")):
        if cfg[section][key] <= 0:
            raise ContractViolation(f"{section}.{key} must be positive")
    if int(cfg["seed"]) < 0:
        raise ContractViolation("seed must be a non-negative integer")


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    """Defaults, deep-merged with an optional JSON file and overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(doc, dict):
            raise FormatError(f"{path}: config root must be an object")
        cfg = _merge(cfg, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    _validate(cfg)
    return cfg


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def write_run_info(out_dir: str | Path, cfg: dict) -> None:
    """Drop config.json and run_info.json so artifacts are self-describing."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    info = {"config_hash": config_hash(cfg), "seed": cfg["seed"]}
    (out / "run_info.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
