"""Dataset persistence: rendered PNG trees, JSONL manifests, prediction CSVs.

A dataset directory looks like::

    out_dir/
      manifest.jsonl          # header line + one record line per image
      images/train/*.png
      images/val/*.png
      images/test/*.png

Every record is rendered from its own derived seed
(``derive_seed(dataset_seed, "record", index)``), so re-running an export
with the same inputs reproduces every file byte for byte, and any single
image can be regenerated in isolation. Formats are documented in
``docs/formats.md``.
"""

from __future__ import annotations

import csv
import json
import multiprocessing
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError, PredictionValidationError
from .factors import FactorClassTable, sample_realization
from .render import render, save_png
from .seeding import derive_seed, rng_from
from .study import SplitPlan

MANIFEST_SCHEMA = "factorbench-manifest/1"
MANIFEST_NAME = "manifest.jsonl"
INCOMPLETE_MARKER = ".incomplete"
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    split: str
    file: str  # path relative to the manifest's directory
    combination: tuple  # 6 class indices, 1-based, factor order
    target: int  # 0..2
    cell: tuple  # (row, col)

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "split": self.split,
            "file": self.file,
            "combination": list(self.combination),
            "target": self.target,
            "cell": list(self.cell),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ManifestRecord":
        return cls(
            id=obj["id"],
            split=obj["split"],
            file=obj["file"],
            combination=tuple(obj["combination"]),
            target=int(obj["target"]),
            cell=tuple(obj["cell"]),
        )


class DatasetManifest:
    """Ordered dataset records plus the header describing their provenance."""

    def __init__(self, header: dict, records: list):
        ids = [r.id for r in records]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("manifest record ids must be unique")
        self.header = header
        self.records = list(records)

    def records_for(self, split: str) -> list:
        if split not in SPLITS:
            raise ConfigurationError(f"unknown split {split!r}; expected one of {SPLITS}")
        return [r for r in self.records if r.split == split]

    def test_ids(self) -> list:
        return [r.id for r in self.records if r.split == "test"]

    def expected_test_classes(self) -> list:
        """Target classes reachable under the test mask (rows with cells)."""
        mask = self.header.get("test_mask")
        if mask is None:
            return sorted({r.target for r in self.records if r.split == "test"})
        return [r for r in range(3) if any(mask[r])]

    def save(self, path):
        path = Path(path)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"header": self.header}, sort_keys=True) + "\n")
            for record in self.records:
                fh.write(json.dumps(record.to_json_obj(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
            if not first:
                raise ConfigurationError(f"empty manifest {path}")
            head_obj = json.loads(first)
            if "header" not in head_obj or head_obj["header"].get("schema") != MANIFEST_SCHEMA:
                raise ConfigurationError(f"{path} is not a {MANIFEST_SCHEMA} manifest")
            records = [ManifestRecord.from_json_obj(json.loads(line)) for line in fh if line.strip()]
        return cls(head_obj["header"], records)

    def __eq__(self, other):
        if not isinstance(other, DatasetManifest):
            return NotImplemented
        return self.header == other.header and self.records == other.records


def build_header(plan: SplitPlan, dataset_seed: int, table: FactorClassTable, extra=None) -> dict:
    header = {
        "schema": MANIFEST_SCHEMA,
        "study": str(plan.pattern.kind),
        "target": plan.pairing.target.label,
        "correlate": plan.pairing.correlate.label,
        "sample_id": plan.sample.sample_id,
        "sample_seed": plan.sample.seed,
        "dataset_seed": dataset_seed,
        "counts": {
            "train": plan.counts.train,
            "val": plan.counts.val,
            "test": plan.counts.test,
        },
        "selected_classes": {
            f.label: list(plan.sample.selected[f]) for f in plan.sample.selected
        },
        "bijection": list(plan.pattern.bijection) if plan.pattern.bijection else None,
        "weights": [[float(v) for v in row] for row in plan.pattern.weights],
        "test_mask": [[bool(v) for v in row] for row in plan.pattern.test_mask],
        "image_side": 128,
        "table": table.to_config(),
    }
    if extra:
        header.update(extra)
    return header


def plan_to_records(plan: SplitPlan) -> list:
    """Assign ids and relative file paths to a plan's records, in manifest
    order (train, then val, then test)."""
    records = []
    for split in SPLITS:
        for k, rec in enumerate(plan.split(split)):
            rid = f"{split}-{k:06d}"
            records.append(
                ManifestRecord(
                    id=rid,
                    split=split,
                    file=f"images/{split}/{rid}.png",
                    combination=rec.combination,
                    target=rec.target,
                    cell=rec.cell,
                )
            )
    return records


# ---------------------------------------------------------------------------
# Export

_WORKER = {}


def _render_record_to_file(table, shape_bank, texture_bank, out_dir, dataset_seed, index, record):
    rng = rng_from(derive_seed(dataset_seed, "record", index))
    realization = sample_realization(table, record.combination, rng)
    image = render(table, realization, shape_bank, texture_bank)
    save_png(image, Path(out_dir) / record.file)


def _pool_init(table, shape_bank, texture_bank, out_dir, dataset_seed):
    _WORKER.update(
        table=table,
        shape_bank=shape_bank,
        texture_bank=texture_bank,
        out_dir=out_dir,
        dataset_seed=dataset_seed,
    )


def _pool_task(args):
    index, record = args
    _render_record_to_file(
        _WORKER["table"],
        _WORKER["shape_bank"],
        _WORKER["texture_bank"],
        _WORKER["out_dir"],
        _WORKER["dataset_seed"],
        index,
        record,
    )
    return index


def export(
    plan: SplitPlan,
    table: FactorClassTable,
    shape_bank,
    texture_bank,
    out_dir,
    dataset_seed: int,
    workers: int = 1,
    header_extra: dict | None = None,
) -> DatasetManifest:
    """Render every planned record to PNG and write the manifest.

    A ``.incomplete`` marker exists in ``out_dir`` for the duration of the
    export; its absence plus the manifest signal a finished dataset.
    Rendering may be spread over ``workers`` processes; output is
    independent of the worker count because every record derives its own
    seed from ``(dataset_seed, record index)``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = out_dir / INCOMPLETE_MARKER
    marker.touch()
    for split in SPLITS:
        (out_dir / "images" / split).mkdir(parents=True, exist_ok=True)

    records = plan_to_records(plan)
    tasks = list(enumerate(records))
    if workers <= 1:
        for index, record in tasks:
            _render_record_to_file(
                table, shape_bank, texture_bank, out_dir, dataset_seed, index, record
            )
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(
            workers,
            initializer=_pool_init,
            initargs=(table, shape_bank, texture_bank, out_dir, dataset_seed),
        ) as pool:
            for _ in pool.imap_unordered(_pool_task, tasks, chunksize=64):
                pass

    manifest = DatasetManifest(build_header(plan, dataset_seed, table, header_extra), records)
    manifest.save(out_dir / MANIFEST_NAME)
    marker.unlink()
    return manifest


# ---------------------------------------------------------------------------
# Predictions

PREDICTION_HEADER = ("id", "predicted")


@dataclass(frozen=True)
class PredictionFile:
    records: tuple  # ((id, predicted), ...)

    def as_dict(self) -> dict:
        return dict(self.records)

    @property
    def ids(self) -> tuple:
        return tuple(i for i, _ in self.records)


def write_predictions(ids, labels, path):
    """Write a prediction CSV (header ``id,predicted``)."""
    ids = list(ids)
    labels = [int(v) for v in labels]
    if len(ids) != len(labels):
        raise ConfigurationError("ids and labels must have equal length")
    bad = [v for v in labels if not 0 <= v <= 2]
    if bad:
        raise PredictionValidationError("predicted class outside 0..2", bad)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_HEADER)
        for rid, label in zip(ids, labels):
            writer.writerow([rid, label])


def read_predictions(path, manifest: DatasetManifest) -> PredictionFile:
    """Parse and validate a prediction CSV against the manifest's test split.

    Validation failures list the offending ids: unknown ids, duplicates,
    out-of-range classes, and missing test ids are all errors.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(PREDICTION_HEADER):
            raise PredictionValidationError(
                f"{path} must start with header 'id,predicted', got {header!r}"
            )
        rows = [row for row in reader if row]

    test_ids = set(manifest.test_ids())
    seen = set()
    duplicates, unknown, out_of_range = [], [], []
    records = []
    for row in rows:
        if len(row) != 2:
            raise PredictionValidationError(f"malformed row in {path}", [row])
        rid, raw = row[0].strip(), row[1].strip()
        try:
            predicted = int(raw)
        except ValueError:
            out_of_range.append(f"{rid}={raw!r}")
            continue
        if rid in seen:
            duplicates.append(rid)
            continue
        seen.add(rid)
        if rid not in test_ids:
            unknown.append(rid)
            continue
        if not 0 <= predicted <= 2:
            out_of_range.append(f"{rid}={predicted}")
            continue
        records.append((rid, predicted))

    if duplicates:
        raise PredictionValidationError("duplicate prediction ids", duplicates)
    if unknown:
        raise PredictionValidationError("predictions for unknown test ids", unknown)
    if out_of_range:
        raise PredictionValidationError("predicted class outside 0..2", out_of_range)
    missing = sorted(test_ids - seen)
    if missing:
        raise PredictionValidationError("missing predictions for test ids", missing)
    return PredictionFile(tuple(records))
