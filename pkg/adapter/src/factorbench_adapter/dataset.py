"""Load exported factorbench datasets into numpy arrays.

This package deliberately does not import factorbench: it consumes the
documented file formats (``docs/formats.md`` in the generator repo) so
external training frameworks can read the data and write scoreable
prediction files without the generator installed.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

SPLITS = ("train", "val", "test")
MANIFEST_SCHEMA = "factorbench-manifest/1"
PREDICTION_HEADER = ("id", "predicted")


class AdapterError(Exception):
    pass


class ManifestDataset:
    """One split of an exported dataset, decoded lazily.

    Items are ``(image, target)`` pairs: image is a float64 H x W x 3
    array normalized by exactly 255, target the integer class 0..2 from
    the manifest. Iteration order follows the manifest record order, so
    two processes reading the same manifest see the same indexing; records
    are read-only, which makes multi-worker loading safe.

    ``transform`` (optional) is applied to the normalized image array
    before it is returned.
    """

    def __init__(self, manifest_path, split: str, transform=None):
        if split not in SPLITS:
            raise AdapterError(f"unknown split {split!r}; expected one of {SPLITS}")
        self.manifest_path = Path(manifest_path)
        self.split = split
        self.transform = transform
        self.root = self.manifest_path.parent

        with open(self.manifest_path, "r", encoding="utf-8") as fh:
            first = fh.readline()
            if not first:
                raise AdapterError(f"empty manifest {self.manifest_path}")
            header = json.loads(first).get("header", {})
            if header.get("schema") != MANIFEST_SCHEMA:
                raise AdapterError(
                    f"{self.manifest_path} is not a {MANIFEST_SCHEMA} manifest"
                )
            self.header = header
            self._records = [
                obj
                for obj in (json.loads(line) for line in fh if line.strip())
                if obj["split"] == split
            ]

    def __len__(self) -> int:
        return len(self._records)

    @property
    def ids(self) -> list:
        return [rec["id"] for rec in self._records]

    @property
    def targets(self) -> np.ndarray:
        return np.array([rec["target"] for rec in self._records], dtype=np.int64)

    def record(self, index: int) -> dict:
        return self._records[index]

    def raw_image(self, index: int) -> np.ndarray:
        """The decoded 8-bit RGB pixels, before normalization."""
        path = self.root / self._records[index]["file"]
        if not path.exists():
            raise AdapterError(f"image file missing: {path}")
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)

    def __getitem__(self, index: int):
        rec = self._records[index]
        image = self.raw_image(index).astype(np.float64) / 255.0
        if self.transform is not None:
            image = self.transform(image)
        return image, int(rec["target"])

    def __iter__(self):
        for index in range(len(self)):
            yield self[index]

    def batches(self, batch_size: int):
        """Yield (images, targets) arrays of up to ``batch_size`` items,
        stacked in manifest order."""
        if batch_size < 1:
            raise AdapterError("batch_size must be positive")
        for start in range(0, len(self), batch_size):
            items = [self[i] for i in range(start, min(start + batch_size, len(self)))]
            images = np.stack([img for img, _ in items])
            targets = np.array([t for _, t in items], dtype=np.int64)
            yield images, targets


def open_dataset(manifest_path, split: str, transform=None) -> ManifestDataset:
    return ManifestDataset(manifest_path, split, transform=transform)


def write_predictions(ids, labels, path):
    """Write a prediction CSV in the scoreable format (header id,predicted).

    Labels are validated to 0..2 before anything is written; an empty id
    list produces a header-only file.
    """
    ids = [str(i) for i in ids]
    labels = [int(v) for v in labels]
    if len(ids) != len(labels):
        raise AdapterError(
            f"ids ({len(ids)}) and labels ({len(labels)}) differ in length"
        )
    bad = [v for v in labels if not 0 <= v <= 2]
    if bad:
        raise AdapterError(f"labels outside 0..2: {sorted(set(bad))}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_HEADER)
        for rid, label in zip(ids, labels):
            writer.writerow([rid, label])
