"""TNSR tensor blob format.

Layout: ASCII magic ``TNSR``, version ``u32`` LE (currently 1), rank
``u32`` LE, one ``u32`` LE per dimension, then the payload as 64-bit
IEEE-754 little-endian values in row-major order.  Used by checkpoints
and externally supplied feature files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ContractViolation, FormatError

MAGIC = b"TNSR"
VERSION = 1
MAX_RANK = 4


def write_tensor(path: str | Path, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim > MAX_RANK:
        raise ContractViolation(f"rank {arr.ndim} exceeds max rank {MAX_RANK}")
    if not np.isfinite(arr).all():
        raise ContractViolation("refusing to write non-finite tensor")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, arr.ndim))
        for d in arr.shape:
            fh.write(struct.pack("<I", d))
        fh.write(np.ascontiguousarray(arr).astype("<f8").tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic (expected {MAGIC!r})")
    off = 4
    if len(blob) < off + 8:
        raise FormatError(f"{path}: truncated header")
    version, rank = struct.unpack_from("<II", blob, off)
    off += 8
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if rank > MAX_RANK:
        raise FormatError(f"{path}: rank {rank} exceeds max rank {MAX_RANK}")
    if len(blob) < off + 4 * rank:
        raise FormatError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{rank}I", blob, off) if rank else ()
    off += 4 * rank
    n = 1
    for d in dims:
        n *= d
    if len(blob) - off != 8 * n:
        raise FormatError(f"{path}: payload size {len(blob) - off} does not match dims {dims}")
    arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(dims)
    arr = arr.astype(np.float64)
    if not np.isfinite(arr).all():
        raise FormatError(f"{path}: payload contains non-finite values")
    return arr
