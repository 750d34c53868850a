"""Image preprocessing and the feature-provider layer.

Features come either from a small trainable CNN over the preprocessed
image or from externally computed TNSR files; downstream code only sees
C x 8 x 8 maps (optionally upscaled to C x 16 x 16) and pooled C-vectors,
so the provider can be swapped without touching the models.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import ContractViolation, FormatError
from .rng import Rng
from .tensor import Parameter, Tensor
from .tensor_io import read_tensor

IMAGE_SIZE = 256


@dataclass(frozen=True)
class CoordTransform:
    """Raw-image to canonical-image coordinate map (pad, then scale)."""

    pad_left: int
    pad_top: int
    scale: float

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return (x + self.pad_left) * self.scale, (y + self.pad_top) * self.scale


def preprocess_image(raw: np.ndarray) -> tuple[np.ndarray, CoordTransform]:
    """Zero-pad the shorter side to a square, bilinear-resize to 256x256.

    Padding splits evenly; an odd remainder goes to the bottom/right.
    Returns the (1, 256, 256) image clamped to [0, 1] and the raw-space
    to canonical-space transform for fixation ingestion.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.size == 0:
        raise ContractViolation("preprocess_image expects a non-empty H x W array")
    h, w = raw.shape
    side = max(h, w)
    pad_top = (side - h) // 2
    pad_left = (side - w) // 2
    sq = np.zeros((side, side), dtype=np.float64)
    sq[pad_top : pad_top + h, pad_left : pad_left + w] = raw
    mr = T.interp_matrix(side, IMAGE_SIZE)
    img = mr @ sq @ mr.T
    np.clip(img, 0.0, 1.0, out=img)
    return img[None, :, :], CoordTransform(pad_left, pad_top, IMAGE_SIZE / side)


# ---------------------------------------------------------------------------
# 8-bit binary PGM (P5), the only image codec the package speaks
# ---------------------------------------------------------------------------


def read_pgm(path: str | Path) -> np.ndarray:
    """Binary P5 PGM to float intensities in [0, 1]."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic)")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        tok = blob[start:pos]
        if not tok.isdigit():
            raise FormatError(f"{path}: bad PGM header token {tok!r}")
        fields.append(int(tok))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if not 0 < maxval <= 255:
        raise FormatError(f"{path}: maxval {maxval} not in (0, 255]")
    data = blob[pos : pos + w * h]
    if len(data) != w * h:
        raise FormatError(f"{path}: payload size {len(data)} != {w * h}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w).astype(np.float64) / maxval


def write_pgm(path: str | Path, img01: np.ndarray) -> None:
    img01 = np.asarray(img01, dtype=np.float64)
    if img01.ndim != 2:
        raise ContractViolation("write_pgm expects an H x W array")
    quant = np.clip(np.rint(img01 * 255.0), 0, 255).astype(np.uint8)
    h, w = quant.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quant.tobytes())


# ---------------------------------------------------------------------------
# feature provider: small CNN stand-in for a pretrained backbone
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CnnConfig:
    """Stack of (3x3 conv, stride 2, tanh) blocks; each halves the grid."""

    channels: tuple[int, ...] = (8, 16, 32, 64, 128)
    image_size: int = IMAGE_SIZE
    in_channels: int = 1

    @property
    def out_channels(self) -> int:
        return self.channels[-1]

    @property
    def out_size(self) -> int:
        return self.image_size >> len(self.channels)


class CnnParams:
    def __init__(self, cfg: CnnConfig, rng: Rng):
        self.cfg = cfg
        self.weights: list[tuple[Parameter, Parameter]] = []
        cin = cfg.in_channels
        for i, cout in enumerate(cfg.channels):
            fan_in = cin * 9
            w = Parameter(f"cnn{i}_w", rng.normals((cout, cin, 3, 3), sigma=1.0 / np.sqrt(fan_in)))
            b = Parameter(f"cnn{i}_b", np.zeros(cout))
            self.weights.append((w, b))
            cin = cout

    def params(self) -> list[Parameter]:
        return [p for wb in self.weights for p in wb]


def extract_features(img: np.ndarray | Tensor, cnn: CnnParams) -> tuple[Tensor, Tensor]:
    """(feature map C x s x s, pooled C-vector); differentiable throughout."""
    x = img if isinstance(img, Tensor) else T.constant(img)
    if x.data.ndim != 3 or x.data.shape[0] != cnn.cfg.in_channels:
        raise ContractViolation(
            f"extract_features expects ({cnn.cfg.in_channels}, H, W), got {x.data.shape}"
        )
    for w, b in cnn.weights:
        x = T.tanh(T.conv2d(x, w.leaf(), b.leaf(), stride=2, pad=1))
    return x, T.mean_spatial(x)


def load_feature_file(path: str | Path, expect_dims: tuple[int, int, int] | None = None) -> np.ndarray:
    """Rank-3 TNSR blob; dims validated when the caller pins them."""
    arr = read_tensor(path)
    if arr.ndim != 3:
        raise FormatError(f"{path}: feature map must be rank 3, got rank {arr.ndim}")
    if expect_dims is not None and arr.shape != tuple(expect_dims):
        raise FormatError(f"{path}: dims {arr.shape} do not match expected {tuple(expect_dims)}")
    return arr


# ---------------------------------------------------------------------------
# map-level operations shared by the two models
# ---------------------------------------------------------------------------


def upscale2x(fmap: Tensor | np.ndarray) -> Tensor:
    """C x 8 x 8 -> C x 16 x 16 bilinear upscale (half-pixel centers)."""
    t = fmap if isinstance(fmap, Tensor) else T.constant(fmap)
    if t.data.ndim != 3 or t.data.shape[1:] != (8, 8):
        raise ContractViolation(f"upscale2x expects C x 8 x 8, got {t.data.shape}")
    return T.upscale2x(t)


def pool_cell(fmap: Tensor, row: int, col: int) -> Tensor:
    """Channel vector at one spatial cell of a C x H x W map."""
    return T.take(fmap, (slice(None), row, col))


def pool_at(fmap: Tensor | np.ndarray, key: int, grid: int = 16) -> Tensor:
    """Fixation-wise feature vector: map cell matching a 16x16 patch key.

    With ``grid=16`` the patch grid and the feature grid align 1:1; with
    ``grid=8`` each feature cell covers a 2x2 patch block (the
    coarse-pooling ablation).
    """
    t = fmap if isinstance(fmap, Tensor) else T.constant(fmap)
    if t.data.ndim != 3 or t.data.shape[1:] != (grid, grid):
        raise ContractViolation(f"pool_at expects C x {grid} x {grid}, got {t.data.shape}")
    if not 0 <= key < 256:
        raise ContractViolation(f"key {key} is not a spatial patch key")
    row, col = key // 16, key % 16
    if grid == 8:
        row, col = row // 2, col // 2
    elif grid != 16:
        raise ContractViolation(f"unsupported pooling grid {grid}")
    return pool_cell(t, row, col)


def global_avg_pool(fmap: Tensor | np.ndarray) -> Tensor:
    """Per-channel spatial mean of a C x H x W map."""
    t = fmap if isinstance(fmap, Tensor) else T.constant(fmap)
    if t.data.ndim != 3:
        raise ContractViolation(f"global_avg_pool expects rank 3, got {t.data.ndim}")
    return T.mean_spatial(t)
