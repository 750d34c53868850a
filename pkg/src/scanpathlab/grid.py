"""Fixations, scanpaths and the spatial patch dictionary.

The canonical coordinate frame is the preprocessed 256x256 image.  The
dictionary partitions it into a 16x16 grid of 16-px patches keyed
row-major 0..255, plus an END token (key 256) that closes every encoded
sequence.  Patch intervals are half-open: x = 255.999 is the last
column, x = 256 is out of bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import math

from .errors import ContractViolation, FormatError
from .rng import Rng


@dataclass(frozen=True)
class Fixation:
    x: float
    y: float


@dataclass(frozen=True)
class Scanpath:
    """Ordered fixation sequence on one image; at least one fixation."""

    image_id: str
    fixations: tuple[Fixation, ...]
    reader_id: str = ""

    def __post_init__(self):
        if len(self.fixations) < 1:
            raise ContractViolation(f"scanpath for {self.image_id!r} must have >= 1 fixation")

    def __len__(self) -> int:
        return len(self.fixations)


@dataclass(frozen=True)
class PatchDictionary:
    """16x16 patch grid over a 256-px square image plus the END token."""

    image_size: int = 256
    grid: int = 16
    end_key: int = field(init=False)

    def __post_init__(self):
        if self.image_size % self.grid != 0:
            raise ContractViolation("image size must be a multiple of the grid")
        object.__setattr__(self, "end_key", self.grid * self.grid)

    @property
    def patch(self) -> int:
        return self.image_size // self.grid

    @property
    def n_keys(self) -> int:
        return self.grid * self.grid + 1

    def bin_fixation(self, f: Fixation) -> int:
        if not (0 <= f.x < self.image_size and 0 <= f.y < self.image_size):
            raise ContractViolation(f"fixation ({f.x}, {f.y}) outside [0, {self.image_size})")
        return int(f.y // self.patch) * self.grid + int(f.x // self.patch)

    def key_cell(self, key: int) -> tuple[int, int]:
        """(row, col) of a spatial key."""
        if not 0 <= key < self.end_key:
            raise ContractViolation(f"key {key} has no spatial cell")
        return key // self.grid, key % self.grid

    def patch_center(self, key: int) -> Fixation:
        row, col = self.key_cell(key)
        half = self.patch / 2.0
        return Fixation(col * self.patch + half, row * self.patch + half)

    def encode_scanpath(self, s: Scanpath) -> list[int]:
        """Keys for each fixation, terminated by the END key."""
        keys = [self.bin_fixation(f) for f in s.fixations]
        keys.append(self.end_key)
        return keys

    def scanpath_from_keys(self, keys: list[int], image_id: str, reader_id: str = "") -> Scanpath:
        """Inverse of encode up to patch resolution; strips a trailing END."""
        if keys and keys[-1] == self.end_key:
            keys = keys[:-1]
        if any(k == self.end_key for k in keys):
            raise ContractViolation("END key inside a fixation sequence")
        if not keys:
            raise ContractViolation("cannot build a scanpath from an empty key sequence")
        return Scanpath(image_id, tuple(self.patch_center(k) for k in keys), reader_id)


def random_scanpath(d: PatchDictionary, n: int, rng: Rng, image_id: str = "random") -> Scanpath:
    """n fixations drawn uniformly over the image (x then y per fixation)."""
    if n < 1:
        raise ContractViolation(f"random scanpath needs n >= 1, got {n}")
    fixes = []
    for _ in range(n):
        x = rng.uniform(0.0, d.image_size)
        y = rng.uniform(0.0, d.image_size)
        fixes.append(Fixation(x, y))
    return Scanpath(image_id, tuple(fixes), reader_id="random")


def mean_scanpath_length(scanpaths: list[Scanpath]) -> int:
    """Rounded mean fixation count; the default random-baseline length."""
    if not scanpaths:
        raise ContractViolation("cannot average over an empty scanpath list")
    return max(1, round(sum(len(s) for s in scanpaths) / len(scanpaths)))


# ---------------------------------------------------------------------------
# JSON Lines interchange: {"image_id","reader_id","fixations":[[x,y],...]}
# ---------------------------------------------------------------------------


def save_scanpaths(path: str | Path, scanpaths: list[Scanpath]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scanpaths:
            rec = {
                "image_id": s.image_id,
                "reader_id": s.reader_id,
                "fixations": [[f.x, f.y] for f in s.fixations],
            }
            fh.write(json.dumps(rec) + "\n")


def load_scanpaths(path: str | Path, image_size: int = 256) -> list[Scanpath]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({e})") from e
            try:
                image_id = rec["image_id"]
                reader_id = rec.get("reader_id", "")
                raw = rec["fixations"]
            except (KeyError, TypeError) as e:
                raise FormatError(f"{path}:{lineno}: missing field {e}") from e
            if not raw:
                raise FormatError(f"{path}:{lineno}: empty fixation list")
            fixes = []
            for fx in raw:
                x, y = float(fx[0]), float(fx[1])
                if not (0 <= x < image_size and 0 <= y < image_size):
                    raise FormatError(
                        f"{path}:{lineno}: fixation ({x}, {y}) outside [0, {image_size})"
                    )
                fixes.append(Fixation(x, y))
            out.append(Scanpath(image_id, tuple(fixes), reader_id))
    return out


def grid_diagonal_half(grid: int = 16) -> float:
    """Half the patch-grid diagonal, in patch units."""
    return math.hypot(grid - 1, grid - 1) / 2.0
