"""Studies: from a study kind and seed to concrete dataset plans.

A *study* fixes how a target factor and a correlate factor co-occur during
training, on a 3x3 grid of (target class, correlate class) cells:

* ``ZSO``    no shortcut: all 9 cells appear uniformly; test is in-distribution.
* ``ZGO``    full shortcut: only the 3 bijection cells are trained on; test
  covers the 6 violating cells.
* ``CGO-c``  compositional relaxations: c extra off-bijection cells are added
  to the training set (at most one per row so every row keeps a held-out
  cell); test covers the remaining off cells.
* ``CHGO``   hybrid: one target class is exclusively paired with its
  bijection column, the other two rows spread uniformly over the two
  remaining columns (5 training cells); test covers the exclusive row's two
  off cells.
* ``FGO-f``  frequency relaxations: each row keeps (1 - f/100) of its mass
  on the bijection cell and spreads f/100 evenly over its two off cells;
  test covers the off cells, where training data is underrepresented.

A *dataset sample* picks 3 classes per factor (plus a base bijection); five
samples are drawn per study so metrics can be averaged. All draws are
deterministic functions of the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StudyDefinitionError
from .factors import FACTORS, Factor, FactorClassTable
from .seeding import as_rng, derive_seed, rng_from

#: Default split sizes; divide by a scale knob for desk-size runs.
DEFAULT_TRAIN = 43740
DEFAULT_VAL = 8748
DEFAULT_TEST = 10000

#: Classes selected per factor in every dataset sample.
CLASSES_PER_FACTOR = 3

STUDY_FAMILIES = ("ZSO", "ZGO", "CGO", "CHGO", "FGO")
CGO_LEVELS = (1, 2, 3)
FGO_LEVELS = (5, 10, 20)


@dataclass(frozen=True)
class StudyKind:
    family: str
    level: int | None = None

    def __post_init__(self):
        if self.family not in STUDY_FAMILIES:
            raise ConfigurationError(f"unknown study family {self.family!r}")
        if self.family == "CGO" and self.level not in CGO_LEVELS:
            raise ConfigurationError(f"CGO level must be in {CGO_LEVELS}")
        if self.family == "FGO" and self.level not in FGO_LEVELS:
            raise ConfigurationError(f"FGO level must be in {FGO_LEVELS}")
        if self.family in ("ZSO", "ZGO", "CHGO") and self.level is not None:
            raise ConfigurationError(f"{self.family} takes no level")

    @property
    def needs_pairing(self) -> bool:
        return self.family != "ZSO"

    def __str__(self):
        return self.family if self.level is None else f"{self.family}-{self.level}"

    @classmethod
    def parse(cls, text: str) -> "StudyKind":
        text = text.strip().upper()
        if "-" in text:
            family, _, level = text.partition("-")
            try:
                return cls(family, int(level))
            except ValueError:
                raise ConfigurationError(f"bad study kind {text!r}") from None
        return cls(text)


@dataclass(frozen=True)
class Pairing:
    """Ordered (predicted factor, correlated factor) pair."""

    target: Factor
    correlate: Factor

    def __post_init__(self):
        if self.target is self.correlate:
            raise ConfigurationError("pairing needs two distinct factors")

    def __str__(self):
        return f"{self.target.label}:{self.correlate.label}"

    @classmethod
    def parse(cls, text: str) -> "Pairing":
        try:
            target, correlate = text.split(":")
        except ValueError:
            raise ConfigurationError(
                f"pairing must look like 'target:correlate', got {text!r}"
            ) from None
        return cls(Factor.from_label(target), Factor.from_label(correlate))

    @property
    def others(self) -> tuple:
        return tuple(f for f in FACTORS if f not in (self.target, self.correlate))


def enumerate_pairings() -> list:
    """All 30 ordered pairings of distinct factors, target-major order."""
    return [Pairing(i, j) for i in FACTORS for j in FACTORS if i is not j]


# ---------------------------------------------------------------------------
# Dataset samples


@dataclass(frozen=True)
class DatasetSample:
    """One random selection of 3 classes per factor, plus a base bijection.

    ``selected[factor]`` holds 3 distinct 1-based class indices in
    ascending order; slot r of the target factor is the classification
    label r. ``base_bijection`` maps target slots to correlate slots and is
    what :func:`cell_pattern` reproduces when no pairing-specific stream is
    supplied; study runs normally re-draw the bijection per pairing.
    """

    sample_id: int
    selected: dict
    base_bijection: tuple
    seed: int

    def classes(self, factor: Factor) -> tuple:
        return self.selected[factor]


def _draw_pattern_prefix(rng):
    """The shared random prefix consumed by every patterned study kind.

    Drawing the same prefix for every kind keeps patterns comparable
    across kinds at a fixed stream: same bijection, and nested extra
    cells for increasing compositional levels.
    """
    bijection = tuple(int(v) for v in rng.permutation(CLASSES_PER_FACTOR))
    row_order = tuple(int(v) for v in rng.permutation(CLASSES_PER_FACTOR))
    cell_pick = tuple(int(rng.integers(2)) for _ in range(CLASSES_PER_FACTOR))
    exclusive_row = int(rng.integers(CLASSES_PER_FACTOR))
    return bijection, row_order, cell_pick, exclusive_row


def select_dataset_samples(
    table: FactorClassTable, master_seed: int, n_samples: int = 5
) -> list:
    """Draw ``n_samples`` dataset samples deterministically from one seed.

    Per sample and factor, 3 distinct classes are drawn uniformly without
    replacement (stored ascending). Each sample gets its own derived seed
    so it can be regenerated in isolation.
    """
    for factor in FACTORS:
        if table.class_count(factor) < CLASSES_PER_FACTOR:
            raise ConfigurationError(
                f"{factor.label} has {table.class_count(factor)} classes; "
                f"need at least {CLASSES_PER_FACTOR}"
            )
    samples = []
    for sid in range(1, n_samples + 1):
        seed = derive_seed(master_seed, "sample", sid)
        rng = rng_from(seed, "select")
        selected = {}
        for factor in FACTORS:
            n = table.class_count(factor)
            picks = rng.choice(n, size=CLASSES_PER_FACTOR, replace=False)
            selected[factor] = tuple(sorted(int(p) + 1 for p in picks))
        base_bijection = _draw_pattern_prefix(rng_from(seed, "pattern"))[0]
        samples.append(
            DatasetSample(
                sample_id=sid,
                selected=selected,
                base_bijection=base_bijection,
                seed=seed,
            )
        )
    return samples


# ---------------------------------------------------------------------------
# Cell patterns


@dataclass(frozen=True)
class CellPattern:
    """3x3 training weights (rows sum to 1) plus the OOD test mask."""

    kind: StudyKind
    weights: np.ndarray
    test_mask: np.ndarray
    bijection: tuple | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.test_mask, dtype=bool)
        if w.shape != (3, 3) or m.shape != (3, 3):
            raise StudyDefinitionError("cell pattern must be 3x3")
        if np.any(w < 0) or not np.allclose(w.sum(axis=1), 1.0):
            raise StudyDefinitionError("train weights must be a distribution per row")
        if not m.any():
            raise StudyDefinitionError("empty test mask")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "test_mask", m)

    @property
    def train_cells(self) -> set:
        return {(r, c) for r in range(3) for c in range(3) if self.weights[r, c] > 0}

    @property
    def test_cells(self) -> set:
        return {(r, c) for r in range(3) for c in range(3) if self.test_mask[r, c]}


def cell_pattern(kind: StudyKind, sample: DatasetSample, rng=None) -> CellPattern:
    """Build the 3x3 train/test occupancy pattern for one study kind.

    ``rng`` is the pairing-specific stream; the bijection and any random
    cell choices are drawn from it. With ``rng=None`` the sample's default
    pattern stream is used, which reproduces ``sample.base_bijection``.
    """
    if kind.family == "ZSO":
        weights = np.full((3, 3), 1.0 / 3.0)
        return CellPattern(kind, weights, np.ones((3, 3), dtype=bool))

    if rng is None:
        rng = rng_from(sample.seed, "pattern")
    bijection, row_order, cell_pick, exclusive_row = _draw_pattern_prefix(as_rng(rng))

    on_bijection = np.zeros((3, 3), dtype=bool)
    for r in range(3):
        on_bijection[r, bijection[r]] = True

    if kind.family == "ZGO":
        weights = on_bijection.astype(np.float64)
        return CellPattern(kind, weights, ~on_bijection, bijection)

    if kind.family == "CGO":
        active = on_bijection.copy()
        for r in row_order[: kind.level]:
            off_cols = [c for c in range(3) if c != bijection[r]]
            active[r, off_cols[cell_pick[r]]] = True
        weights = active / active.sum(axis=1, keepdims=True)
        return CellPattern(kind, weights, ~on_bijection & ~active, bijection)

    if kind.family == "CHGO":
        weights = np.zeros((3, 3))
        mask = np.zeros((3, 3), dtype=bool)
        star_col = bijection[exclusive_row]
        weights[exclusive_row, star_col] = 1.0
        other_cols = [c for c in range(3) if c != star_col]
        for r in range(3):
            if r != exclusive_row:
                weights[r, other_cols] = 0.5
            else:
                mask[r, other_cols] = True
        return CellPattern(kind, weights, mask, bijection)

    if kind.family == "FGO":
        f = kind.level / 100.0
        weights = np.full((3, 3), f / 2.0)
        for r in range(3):
            weights[r, bijection[r]] = 1.0 - f
        return CellPattern(kind, weights, ~on_bijection, bijection)

    raise ConfigurationError(f"unhandled study kind {kind}")


# ---------------------------------------------------------------------------
# Split plans


@dataclass(frozen=True)
class SplitCounts:
    train: int = DEFAULT_TRAIN
    val: int = DEFAULT_VAL
    test: int = DEFAULT_TEST

    def __post_init__(self):
        for name in ("train", "val", "test"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} count must be positive")

    @classmethod
    def scaled(cls, scale: float = 1) -> "SplitCounts":
        """Default counts divided by ``scale`` (rounded, at least 1)."""
        if scale <= 0:
            raise ConfigurationError("scale must be positive")
        return cls(
            train=max(1, round(DEFAULT_TRAIN / scale)),
            val=max(1, round(DEFAULT_VAL / scale)),
            test=max(1, round(DEFAULT_TEST / scale)),
        )


@dataclass(frozen=True)
class PlanRecord:
    """One planned dataset record: class combination, label, pattern cell."""

    combination: tuple
    target: int  # 0..2, position of the target class among the selected 3
    cell: tuple  # (row, col) in the 3x3 pattern


@dataclass(frozen=True)
class SplitPlan:
    pattern: CellPattern
    sample: DatasetSample
    pairing: Pairing
    counts: SplitCounts
    records: dict = field(default_factory=dict)  # split name -> list[PlanRecord]

    def split(self, name: str) -> list:
        return self.records[name]


def balanced_counts(total: int, groups: int) -> list:
    """Split ``total`` into ``groups`` integers differing by at most 1."""
    base, rem = divmod(total, groups)
    return [base + (1 if g < rem else 0) for g in range(groups)]


def _make_combination(sample, pairing, target_slot, correlate_slot, other_slots):
    slots = {pairing.target: target_slot, pairing.correlate: correlate_slot}
    slots.update(dict(zip(pairing.others, other_slots)))
    return tuple(sample.selected[f][slots[f]] for f in FACTORS)


def _draw_distribution_split(pattern, sample, pairing, total, rng):
    """Records following the training distribution: balanced target classes,
    correlate per row weights, remaining factors uniform."""
    records = []
    for row, row_count in enumerate(balanced_counts(total, 3)):
        cols = rng.choice(3, size=row_count, p=pattern.weights[row])
        others = rng.integers(CLASSES_PER_FACTOR, size=(row_count, len(pairing.others)))
        for col, other_slots in zip(cols, others):
            records.append(
                PlanRecord(
                    combination=_make_combination(
                        sample, pairing, row, int(col), [int(u) for u in other_slots]
                    ),
                    target=row,
                    cell=(row, int(col)),
                )
            )
    return records


def _draw_test_split(pattern, sample, pairing, total, rng):
    """Test records: uniform over the rows present in the test mask, and
    within a row spread as evenly as possible over its masked cells."""
    rows = [r for r in range(3) if pattern.test_mask[r].any()]
    if not rows:
        raise StudyDefinitionError("test mask has no cells")
    records = []
    for row, row_count in zip(rows, balanced_counts(total, len(rows))):
        cols = [c for c in range(3) if pattern.test_mask[row, c]]
        per_cell = balanced_counts(row_count, len(cols))
        order = rng.permutation(len(cols))  # which cells absorb the remainder
        cell_counts = [0] * len(cols)
        for rank, cell_idx in enumerate(order):
            cell_counts[cell_idx] = per_cell[rank]
        for col, cell_count in zip(cols, cell_counts):
            others = rng.integers(
                CLASSES_PER_FACTOR, size=(cell_count, len(pairing.others))
            )
            for other_slots in others:
                records.append(
                    PlanRecord(
                        combination=_make_combination(
                            sample, pairing, row, col, [int(u) for u in other_slots]
                        ),
                        target=row,
                        cell=(row, col),
                    )
                )
    return records


def materialize_split(
    pattern: CellPattern,
    sample: DatasetSample,
    pairing: Pairing,
    counts: SplitCounts,
    rng,
) -> SplitPlan:
    """Expand a cell pattern into concrete train/val/test record lists.

    Train and validation are drawn from the same distribution with
    independent streams; the test split only uses test-mask cells. Target
    classes are balanced within +-1 in every split (over the classes the
    split can reach).
    """
    rng = as_rng(rng)
    streams = [np.random.default_rng(int(s)) for s in rng.integers(2**63, size=3)]
    records = {
        "train": _draw_distribution_split(pattern, sample, pairing, counts.train, streams[0]),
        "val": _draw_distribution_split(pattern, sample, pairing, counts.val, streams[1]),
        "test": _draw_test_split(pattern, sample, pairing, counts.test, streams[2]),
    }
    return SplitPlan(
        pattern=pattern, sample=sample, pairing=pairing, counts=counts, records=records
    )


def bookkeeping_correlate(target: Factor) -> Factor:
    """The correlate factor recorded for single-factor (ZSO) studies: the
    first factor other than the target, in index order."""
    return next(f for f in FACTORS if f is not target)
