"""Synthetic dataset generator with label/fixation coupling.

Each latent condition owns a disjoint rectangle of the patch grid.  An
image activates a subset of conditions; active conditions place a
Gaussian amplitude blob (channel 0) at their region's center of the
feature map and contribute a cluster of fixations there, visited in
condition order.  Channels 1 and 2 carry fixed row/col coordinate ramps
so pooled features identify where they came from; remaining channels
are noise.  A per-image offset on channel 0 drowns the blob signal in
the global mean, so spatially pooled (scanpath-guided) features carry
information that plain global pooling does not.

Generation is deterministic: every image derives its own stream from
(seed, image id), so the output tree is byte-identical across runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .classifier import N_CLASSES
from .errors import ContractViolation
from .grid import Fixation, Scanpath, save_scanpaths
from .rng import Rng
from .tensor_io import write_tensor

FEATURE_GRID = 8
PX_PER_CELL = 32  # 256 px / 8 feature cells


@dataclass(frozen=True)
class SyntheticSpec:
    n_images: int
    n_conditions: int = 4
    channels: int = 8
    regions: tuple[tuple[int, int, int, int], ...] | None = None  # (r0, r1, c0, c1) patch rects
    active_min: int = 1
    active_max: int | None = None
    fixations_per_region: int = 2
    blob_amplitude: float = 3.0
    blob_sigma: float = 0.7  # feature cells
    fixation_spread: float = 6.0  # px around the region center
    scanpath_noise: float = 0.0  # extra px jitter
    cell_noise: float = 0.3
    offset_noise: float = 1.0
    uncertain_frac: float = 0.0
    readers: int = 1
    split_fracs: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if self.n_images < 1:
            raise ContractViolation("n_images must be >= 1")
        if not 1 <= self.n_conditions <= N_CLASSES:
            raise ContractViolation(f"n_conditions must be in 1..{N_CLASSES}")
        if self.channels < 3:
            raise ContractViolation("need >= 3 channels (blob + two coordinate ramps)")
        hi = self.active_max if self.active_max is not None else self.n_conditions
        if not 0 <= self.active_min <= hi <= self.n_conditions:
            raise ContractViolation("active_min/active_max out of range")
        if self.fixations_per_region < 1 or self.readers < 1:
            raise ContractViolation("fixations_per_region and readers must be >= 1")
        if abs(sum(self.split_fracs) - 1.0) > 1e-9:
            raise ContractViolation("split fractions must sum to 1")


def default_regions(k: int, grid: int = 16) -> tuple[tuple[int, int, int, int], ...]:
    """Disjoint patch-grid rectangles for k conditions (block partition)."""
    side = math.ceil(math.sqrt(k))
    step = grid // side
    regions = []
    for i in range(k):
        br, bc = divmod(i, side)
        regions.append((br * step, (br + 1) * step, bc * step, (bc + 1) * step))
    return tuple(regions)


def _check_disjoint(regions) -> None:
    cells: set[tuple[int, int]] = set()
    for r0, r1, c0, c1 in regions:
        if not (0 <= r0 < r1 <= 16 and 0 <= c0 < c1 <= 16):
            raise ContractViolation(f"region {(r0, r1, c0, c1)} outside the 16x16 grid")
        for r in range(r0, r1):
            for c in range(c0, c1):
                if (r, c) in cells:
                    raise ContractViolation("condition regions must be disjoint")
                cells.add((r, c))


@dataclass
class SyntheticDataset:
    root: Path
    feature_dir: Path
    scanpath_file: Path
    label_file: Path
    splits_file: Path
    image_ids: list[str] = field(default_factory=list)


def _region_center_px(region) -> tuple[float, float]:
    """Pixel center of the region's central patch, so fixation clusters
    concentrate inside one patch instead of straddling a patch corner."""
    r0, r1, c0, c1 = region
    row = (r0 + r1 - 1) // 2
    col = (c0 + c1 - 1) // 2
    return (col * 16.0 + 8.0, row * 16.0 + 8.0)  # (x, y)


def _feature_map(spec: SyntheticSpec, active: list[int], regions, rng: Rng) -> np.ndarray:
    fmap = rng.normals((spec.channels, FEATURE_GRID, FEATURE_GRID), sigma=spec.cell_noise)
    fmap[0] += rng.normal(0.0, spec.offset_noise)
    rows = np.arange(FEATURE_GRID, dtype=np.float64)
    rr, cc = np.meshgrid(rows, rows, indexing="ij")
    for k in active:
        cx, cy = _region_center_px(regions[k])
        fr, fc = cy / PX_PER_CELL - 0.5, cx / PX_PER_CELL - 0.5
        fmap[0] += spec.blob_amplitude * np.exp(
            -((rr - fr) ** 2 + (cc - fc) ** 2) / (2.0 * spec.blob_sigma**2)
        )
    ramp = rows / (FEATURE_GRID - 1)
    fmap[1] = ramp[:, None]
    fmap[2] = ramp[None, :]
    return fmap


_MAX_COORD = np.nextafter(256.0, 0.0)


def _scanpath(spec: SyntheticSpec, image_id: str, reader: int, active: list[int], regions, rng: Rng) -> Scanpath:
    fixes = []
    for k in active:
        cx, cy = _region_center_px(regions[k])
        for _ in range(spec.fixations_per_region):
            x = cx + rng.normal(0.0, spec.fixation_spread) + rng.normal(0.0, spec.scanpath_noise)
            y = cy + rng.normal(0.0, spec.fixation_spread) + rng.normal(0.0, spec.scanpath_noise)
            fixes.append(Fixation(min(max(x, 0.0), _MAX_COORD), min(max(y, 0.0), _MAX_COORD)))
    if not fixes:  # no active condition: a single center fixation
        fixes.append(Fixation(128.0, 128.0))
    return Scanpath(image_id, tuple(fixes), reader_id=f"reader{reader}")


def gen_synthetic(spec: SyntheticSpec, rng: Rng, out_dir: str | Path) -> SyntheticDataset:
    """Write features (TNSR), scanpaths (JSONL), labels (CSV) and splits."""
    from .dataset import write_labels_csv  # local import to avoid a cycle

    regions = spec.regions if spec.regions is not None else default_regions(spec.n_conditions)
    if len(regions) != spec.n_conditions:
        raise ContractViolation("one region per condition required")
    _check_disjoint(regions)

    root = Path(out_dir)
    feature_dir = root / "features"
    feature_dir.mkdir(parents=True, exist_ok=True)
    active_hi = spec.active_max if spec.active_max is not None else spec.n_conditions

    image_ids = []
    labels: dict[str, np.ndarray] = {}
    scanpaths = []
    for i in range(spec.n_images):
        image_id = f"synth{i:05d}"
        image_ids.append(image_id)
        r_img = rng.fork(f"img:{image_id}")

        r_lab = r_img.fork("labels")
        count = spec.active_min + r_lab.randrange(active_hi - spec.active_min + 1)
        active = sorted(r_lab.sample(spec.n_conditions, count))
        lab = np.zeros(N_CLASSES, dtype=np.int64)
        lab[active] = 1
        for d in range(spec.n_conditions):
            if spec.uncertain_frac > 0.0 and r_lab.random() < spec.uncertain_frac:
                lab[d] = -1
        labels[image_id] = lab

        fmap = _feature_map(spec, active, regions, r_img.fork("features"))
        write_tensor(feature_dir / f"{image_id}.tnsr", fmap)

        for reader in range(spec.readers):
            scanpaths.append(
                _scanpath(spec, image_id, reader, active, regions, r_img.fork(f"scan:{reader}"))
            )

    scanpath_file = root / "scanpaths.jsonl"
    save_scanpaths(scanpath_file, scanpaths)
    label_file = root / "labels.csv"
    write_labels_csv(label_file, labels)

    order = list(image_ids)
    rng.fork("splits").shuffle(order)
    n_train = round(spec.split_fracs[0] * len(order))
    n_valid = round(spec.split_fracs[1] * len(order))
    splits = {
        "train": sorted(order[:n_train]),
        "valid": sorted(order[n_train : n_train + n_valid]),
        "test": sorted(order[n_train + n_valid :]),
    }
    splits_file = root / "splits.json"
    splits_file.write_text(json.dumps(splits, indent=2, sort_keys=True) + "\n")

    meta = {"spec": asdict(spec), "seed": rng.seed}
    (root / "synth_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return SyntheticDataset(root, feature_dir, scanpath_file, label_file, splits_file, image_ids)
