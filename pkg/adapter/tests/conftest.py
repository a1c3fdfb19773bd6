import json
import struct

import numpy as np
import pytest

pytest.importorskip("factorbench_adapter")
from PIL import Image


@pytest.fixture()
def tiny_dataset(tmp_path):
    """A handcrafted two-split dataset following the documented formats."""
    rng = np.random.default_rng(7)
    root = tmp_path / "sample-1"
    records = []
    images = {}
    for split, count in (("train", 4), ("test", 6)):
        (root / "images" / split).mkdir(parents=True)
        for k in range(count):
            rid = f"{split}-{k:06d}"
            rel = f"images/{split}/{rid}.png"
            arr = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
            Image.fromarray(arr, "RGB").save(root / rel)
            images[rid] = arr
            records.append(
                {
                    "id": rid,
                    "split": split,
                    "file": rel,
                    "combination": [1, 2, 3, 4, 5, 1],
                    "target": k % 3,
                    "cell": [k % 3, (k + 1) % 3],
                }
            )
    header = {
        "schema": "factorbench-manifest/1",
        "study": "ZSO",
        "target": "hue",
        "correlate": "position",
        "sample_id": 1,
        "counts": {"train": 4, "val": 0, "test": 6},
        "test_mask": [[True] * 3] * 3,
        "image_side": 16,
    }
    manifest = root / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return manifest, records, images


def write_idx_fixture(directory, per_class=20, side=28):
    """Minimal IDX digit files: one filled rectangle per image, labels 0..9."""
    rng = np.random.default_rng(11)
    images, labels = [], []
    for k in range(per_class):
        for digit in range(10):
            img = np.zeros((side, side), dtype=np.uint8)
            h = 6 + digit + int(rng.integers(0, 3))
            w = 16 - digit + int(rng.integers(0, 3))
            y0 = int(rng.integers(2, side - h - 1))
            x0 = int(rng.integers(2, side - w - 1))
            img[y0 : y0 + h, x0 : x0 + w] = 255
            images.append(img)
            labels.append(digit)
    images = np.stack(images)
    labels = np.array(labels, dtype=np.uint8)
    images_path = directory / "images-idx3-ubyte"
    labels_path = directory / "labels-idx1-ubyte"
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        fh.write(labels.tobytes())
    return images_path, labels_path
