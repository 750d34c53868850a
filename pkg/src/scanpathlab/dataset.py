"""Dataset index: labels, scanpaths, feature files and split tags.

Labels travel as CSV with header ``image_id,c01..c14`` and cells in
{1, 0, -1}; -1 marks an uncertain label.  Scanpaths use the JSONL format
from :mod:`scanpathlab.grid`; features are one TNSR file per image.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import N_CLASSES, validate_labels
from .errors import ContractViolation, FormatError
from .grid import Scanpath, load_scanpaths, save_scanpaths
from .rng import Rng

SPLITS = ("train", "valid", "test")


def write_labels_csv(path: str | Path, labels: dict[str, np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id"] + [f"c{i + 1:02d}" for i in range(N_CLASSES)])
        for image_id in sorted(labels):
            writer.writerow([image_id] + [str(int(v)) for v in validate_labels(labels[image_id])])


def read_labels_csv(path: str | Path) -> dict[str, np.ndarray]:
    expected = ["image_id"] + [f"c{i + 1:02d}" for i in range(N_CLASSES)]
    out: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise FormatError(f"{path}: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != N_CLASSES + 1:
                raise FormatError(f"{path}:{lineno}: expected {N_CLASSES + 1} cells, got {len(row)}")
            image_id = row[0]
            if image_id in out:
                raise FormatError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            values = np.empty(N_CLASSES, dtype=np.int64)
            for col, cell in enumerate(row[1:], start=2):
                if cell not in ("1", "0", "-1"):
                    raise FormatError(
                        f"{path}:{lineno}: column {col} ({expected[col - 1]}): "
                        f"cell {cell!r} not in {{1, 0, -1}}"
                    )
                values[col - 2] = int(cell)
            out[image_id] = values
    return out


@dataclass
class DatasetItem:
    image_id: str
    labels: np.ndarray
    scanpaths: list[Scanpath] = field(default_factory=list)
    feature_path: Path | None = None
    image_path: Path | None = None
    split: str = "train"


@dataclass
class DatasetIndex:
    items: dict[str, DatasetItem]

    def ids(self, split: str | None = None) -> list[str]:
        if split is None:
            return sorted(self.items)
        if split not in SPLITS:
            raise ContractViolation(f"unknown split {split!r}")
        return sorted(i for i, it in self.items.items() if it.split == split)

    def __getitem__(self, image_id: str) -> DatasetItem:
        return self.items[image_id]

    def __len__(self) -> int:
        return len(self.items)


def ingest(
    scanpath_file: str | Path,
    label_file: str | Path,
    feature_dir: str | Path | None,
    splits_file: str | Path | None = None,
    select_one_seed: int | None = None,
) -> DatasetIndex:
    """Cross-validated index over the three on-disk artifacts.

    With ``select_one_seed`` set, images with several readers keep one
    scanpath chosen by a per-image stream of that seed, so the choice is
    stable under reordering.
    """
    labels = read_labels_csv(label_file)
    items = {image_id: DatasetItem(image_id, lab) for image_id, lab in labels.items()}

    for s in load_scanpaths(scanpath_file):
        if s.image_id not in items:
            raise FormatError(f"{scanpath_file}: scanpath for unknown image_id {s.image_id!r}")
        items[s.image_id].scanpaths.append(s)

    if select_one_seed is not None:
        base = Rng(select_one_seed)
        for it in items.values():
            if len(it.scanpaths) > 1:
                pick = base.fork(it.image_id).randrange(len(it.scanpaths))
                it.scanpaths = [it.scanpaths[pick]]

    if feature_dir is not None:
        feature_dir = Path(feature_dir)
        missing = [i for i in sorted(items) if not (feature_dir / f"{i}.tnsr").is_file()]
        if missing:
            raise FormatError(f"{feature_dir}: missing feature files for {', '.join(missing)}")
        for image_id, it in items.items():
            it.feature_path = feature_dir / f"{image_id}.tnsr"

    if splits_file is not None:
        splits = json.loads(Path(splits_file).read_text())
        tagged = set()
        for split, ids in splits.items():
            if split not in SPLITS:
                raise FormatError(f"{splits_file}: unknown split {split!r}")
            for image_id in ids:
                if image_id not in items:
                    raise FormatError(f"{splits_file}: unknown image_id {image_id!r}")
                items[image_id].split = split
                tagged.add(image_id)
        untagged = sorted(set(items) - tagged)
        if untagged:
            raise FormatError(f"{splits_file}: images without a split: {', '.join(untagged)}")

    return DatasetIndex(items)


def dump_index(index: DatasetIndex, out_dir: str | Path) -> None:
    """Write labels, scanpaths and splits back out (features stay in place)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_labels_csv(out / "labels.csv", {i: it.labels for i, it in index.items.items()})
    scanpaths = [s for i in sorted(index.items) for s in index.items[i].scanpaths]
    save_scanpaths(out / "scanpaths.jsonl", scanpaths)
    splits = {split: index.ids(split) for split in SPLITS}
    (out / "splits.json").write_text(json.dumps(splits, indent=2, sort_keys=True) + "\n")
