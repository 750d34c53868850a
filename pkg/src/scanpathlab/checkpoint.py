"""Checkpoint persistence: manifest.json plus one TNSR blob per tensor.

Layout::

    <dir>/manifest.json      names, dims, optimizer scalars, config hash,
                             seed, epoch, step, validation metric
    <dir>/params/<name>.tnsr
    <dir>/adam_m/<name>.tnsr
    <dir>/adam_v/<name>.tnsr

Round trips are bit-exact; loading validates names, dims and (when the
caller pins one) the config hash.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .errors import ContractViolation, FormatError
from .optim import AdamState
from .tensor import Parameter
from .tensor_io import read_tensor, write_tensor

_NAME_RE = re.compile(r"^[A-Za-z0-9_.-]+$")
FORMAT_VERSION = 1


def save_checkpoint(
    out_dir: str | Path,
    params: list[Parameter],
    adam: AdamState | None,
    manifest: dict | None = None,
) -> Path:
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise ContractViolation("parameter names must be unique")
    for name in names:
        if not _NAME_RE.match(name):
            raise ContractViolation(f"parameter name {name!r} is not filename-safe")
    out = Path(out_dir)
    (out / "params").mkdir(parents=True, exist_ok=True)
    doc = dict(manifest or {})
    doc["format"] = FORMAT_VERSION
    doc["params"] = [{"name": p.name, "dims": list(p.value.shape)} for p in params]
    for p in params:
        write_tensor(out / "params" / f"{p.name}.tnsr", p.value)
    if adam is not None:
        doc["adam"] = {"t": adam.t, "lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps}
        for sub, table in (("adam_m", adam.m), ("adam_v", adam.v)):
            (out / sub).mkdir(exist_ok=True)
            for name in names:
                write_tensor(out / sub / f"{name}.tnsr", table[name])
    else:
        doc["adam"] = None
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return out


def load_checkpoint(ckpt_dir: str | Path) -> tuple[dict[str, np.ndarray], dict | None, dict]:
    """Returns (values by name, adam state dict or None, manifest)."""
    ckpt = Path(ckpt_dir)
    manifest_path = ckpt / "manifest.json"
    if not manifest_path.is_file():
        raise FormatError(f"{ckpt}: missing manifest.json")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != FORMAT_VERSION:
        raise FormatError(f"{ckpt}: unsupported checkpoint format {manifest.get('format')!r}")
    values: dict[str, np.ndarray] = {}
    for entry in manifest["params"]:
        name, dims = entry["name"], tuple(entry["dims"])
        blob = ckpt / "params" / f"{name}.tnsr"
        if not blob.is_file():
            raise FormatError(f"{ckpt}: missing blob for parameter {name!r}")
        arr = read_tensor(blob)
        if arr.shape != dims:
            raise FormatError(f"{ckpt}: parameter {name!r} dims {arr.shape} != manifest {dims}")
        values[name] = arr
    adam = None
    if manifest.get("adam") is not None:
        adam = dict(manifest["adam"])
        for sub, key in (("adam_m", "m"), ("adam_v", "v")):
            table = {}
            for name in values:
                blob = ckpt / sub / f"{name}.tnsr"
                if not blob.is_file():
                    raise FormatError(f"{ckpt}: missing {sub} blob for {name!r}")
                arr = read_tensor(blob)
                if arr.shape != values[name].shape:
                    raise FormatError(f"{ckpt}: {sub}/{name} dims {arr.shape} mismatch")
                table[name] = arr
            adam[key] = table
    return values, adam, manifest


def restore_params(params: list[Parameter], values: dict[str, np.ndarray]) -> None:
    """Copy loaded values into an existing parameter set (names must match)."""
    names = {p.name for p in params}
    if names != set(values):
        missing = sorted(names - set(values))
        extra = sorted(set(values) - names)
        raise FormatError(f"checkpoint names mismatch (missing {missing}, extra {extra})")
    for p in params:
        if values[p.name].shape != p.value.shape:
            raise FormatError(f"parameter {p.name!r}: dims {values[p.name].shape} != {p.value.shape}")
        p.value[...] = values[p.name]
        p.grad[...] = 0.0


def restore_adam(params: list[Parameter], adam_doc: dict) -> AdamState:
    state = AdamState(params, lr=adam_doc["lr"], beta1=adam_doc["beta1"], beta2=adam_doc["beta2"], eps=adam_doc["eps"])
    state.t = int(adam_doc["t"])
    for p in params:
        state.m[p.name][...] = adam_doc["m"][p.name]
        state.v[p.name][...] = adam_doc["v"][p.name]
    return state


def check_config_hash(manifest: dict, expected: str, ckpt_dir: str | Path) -> None:
    stored = manifest.get("config_hash")
    if stored != expected:
        raise FormatError(
            f"{ckpt_dir}: config_hash mismatch (checkpoint {stored!r}, current {expected!r})"
        )
