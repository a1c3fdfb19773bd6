"""Factor model: six generative factors, class regions, and sampling.

Every image is controlled by six independent factors of variation. Each
factor has a continuous or discrete *space* and a small number of named
*classes*, where a class is a region of the space. Sampling a realization
means drawing one concrete value per factor, uniformly from the region of
the requested class.

Factor order (and the stable 1-based index used in manifests):

1. position   object placement, normalized (x, y) in [0, 1]^2
2. hue        color angle in degrees, [0, 360)
3. lightness  pair (l1, l2) of ramp endpoints in [0, 1]^2, l1 <= l2
4. scale      object size multiplier in [0.69, 1.45]
5. shape      asset index into a bank of binary object masks
6. texture    (asset index, normalized crop origin) into a texture bank

Interval boundaries are closed on both ends; adjacent classes in the
built-in table are separated by gaps so membership ties cannot occur.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ConfigurationError, OutOfClassError
from .seeding import as_rng


class Factor(Enum):
    """The six factors, with their stable manifest index."""

    POSITION = 1
    HUE = 2
    LIGHTNESS = 3
    SCALE = 4
    SHAPE = 5
    TEXTURE = 6

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Factor":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ConfigurationError(f"unknown factor {label!r}") from None


FACTORS = tuple(Factor)

#: Instance indices of shape class ``d`` live in
#: ``[d * SHAPE_INDEX_STRIDE, d * SHAPE_INDEX_STRIDE + count_d)`` so a shape
#: asset index encodes its class independently of the bank that backs it.
SHAPE_INDEX_STRIDE = 100_000

#: Per-class instance counts of the canonical MNIST training split; used by
#: the built-in table when no bank-specific counts are supplied.
MNIST_TRAIN_COUNTS = (5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949)

#: Default factor spaces. Custom tables may use different scale bounds; the
#: renderer then checks object placement explicitly.
SCALE_SPACE = (0.69, 1.45)


# ---------------------------------------------------------------------------
# Regions


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] on the real line."""

    lo: float
    hi: float

    def validate(self):
        if not self.lo <= self.hi:
            raise ConfigurationError(f"interval lo {self.lo} > hi {self.hi}")


@dataclass(frozen=True)
class ModularInterval:
    """Closed arc [lo, hi] on the 360-degree circle; may wrap (lo > hi)."""

    lo: float
    hi: float

    def validate(self):
        for v in (self.lo, self.hi):
            if not 0 <= v < 360:
                raise ConfigurationError(f"modular bound {v} outside [0, 360)")

    @property
    def width(self) -> float:
        if self.lo <= self.hi:
            return self.hi - self.lo
        return 360 - self.lo + self.hi


@dataclass(frozen=True)
class Rect:
    """Axis-aligned box [lo_x, hi_x] x [lo_y, hi_y] in normalized coords."""

    lo_x: float
    hi_x: float
    lo_y: float
    hi_y: float

    def validate(self):
        for v in (self.lo_x, self.hi_x, self.lo_y, self.hi_y):
            if not 0 <= v <= 1:
                raise ConfigurationError(f"rect edge {v} outside [0, 1]")
        if self.lo_x > self.hi_x or self.lo_y > self.hi_y:
            raise ConfigurationError("rect with inverted edges")


@dataclass(frozen=True)
class PairIntervals:
    """Product of two closed intervals, for two-component factors."""

    lo1: float
    hi1: float
    lo2: float
    hi2: float

    def validate(self):
        if self.lo1 > self.hi1 or self.lo2 > self.hi2:
            raise ConfigurationError("pair interval with inverted bounds")


@dataclass(frozen=True)
class IndexSet:
    """Nonempty set of asset indices."""

    ids: tuple

    def __init__(self, ids: Iterable[int]):
        object.__setattr__(self, "ids", tuple(sorted(set(int(i) for i in ids))))

    def validate(self):
        if not self.ids:
            raise ConfigurationError("empty index set")

    def as_range(self):
        """(start, stop) if the ids are contiguous, else None."""
        if self.ids and self.ids[-1] - self.ids[0] + 1 == len(self.ids):
            return self.ids[0], self.ids[-1] + 1
        return None


Region = Union[Interval, ModularInterval, Rect, PairIntervals, IndexSet]


def contains(region: Region, value) -> bool:
    """True iff ``value`` lies inside ``region``.

    The value type must match the region variant: scalar for intervals,
    (x, y) for rects, (a, b) for interval pairs, int for index sets.
    Modular intervals wrap at 360 degrees.
    """
    if isinstance(region, Interval):
        v = float(value)
        return region.lo <= v <= region.hi
    if isinstance(region, ModularInterval):
        v = float(value) % 360.0
        if region.lo <= region.hi:
            return region.lo <= v <= region.hi
        return v >= region.lo or v <= region.hi
    if isinstance(region, Rect):
        x, y = value
        return region.lo_x <= x <= region.hi_x and region.lo_y <= y <= region.hi_y
    if isinstance(region, PairIntervals):
        a, b = value
        return region.lo1 <= a <= region.hi1 and region.lo2 <= b <= region.hi2
    if isinstance(region, IndexSet):
        if not isinstance(value, (int, np.integer)):
            raise TypeError(f"index set membership needs an int, got {type(value)}")
        return int(value) in set(region.ids)
    raise TypeError(f"unknown region type {type(region)}")


def sample_from_region(region: Region, rng: np.random.Generator):
    """Draw one value uniformly from ``region``.

    Continuous regions use the uniform measure; index sets are uniform over
    their ids. Modular intervals are drawn on the unwrapped arc and reduced
    mod 360. Interval pairs are sorted after the draw so the first component
    is the smaller one.
    """
    if isinstance(region, Interval):
        return float(rng.uniform(region.lo, region.hi))
    if isinstance(region, ModularInterval):
        hi = region.hi if region.lo <= region.hi else region.hi + 360.0
        return float(rng.uniform(region.lo, hi)) % 360.0
    if isinstance(region, Rect):
        x = float(rng.uniform(region.lo_x, region.hi_x))
        y = float(rng.uniform(region.lo_y, region.hi_y))
        return (x, y)
    if isinstance(region, PairIntervals):
        a = float(rng.uniform(region.lo1, region.hi1))
        b = float(rng.uniform(region.lo2, region.hi2))
        return (a, b) if a <= b else (b, a)
    if isinstance(region, IndexSet):
        if not region.ids:
            raise ConfigurationError("cannot sample from an empty index set")
        return int(region.ids[int(rng.integers(len(region.ids)))])
    raise TypeError(f"unknown region type {type(region)}")


# ---------------------------------------------------------------------------
# Realizations and combinations


@dataclass(frozen=True)
class FactorRealization:
    """One concrete sample of all six factors.

    ``texture_origin`` is the normalized crop origin (x, y) in [0, 1)^2;
    it carries the intra-class randomness of the texture factor and does
    not affect class membership.
    """

    position: tuple  # (x, y)
    hue: float  # degrees
    lightness: tuple  # (l1, l2), l1 <= l2
    scale: float
    shape: int  # stride-encoded asset index
    texture: int  # texture asset index
    texture_origin: tuple  # (ox, oy)

    def component(self, factor: Factor):
        """The membership-relevant component for ``factor``."""
        if factor is Factor.POSITION:
            return self.position
        if factor is Factor.HUE:
            return self.hue
        if factor is Factor.LIGHTNESS:
            return self.lightness
        if factor is Factor.SCALE:
            return self.scale
        if factor is Factor.SHAPE:
            return self.shape
        return self.texture


ClassCombination = tuple  # 6 class indices, 1-based, in factor order


def validate_combination(table: "FactorClassTable", combination: Sequence[int]) -> ClassCombination:
    combo = tuple(int(j) for j in combination)
    if len(combo) != len(FACTORS):
        raise ConfigurationError(f"combination needs {len(FACTORS)} entries, got {len(combo)}")
    for factor, j in zip(FACTORS, combo):
        n = table.class_count(factor)
        if not 1 <= j <= n:
            raise ConfigurationError(
                f"{factor.label} class index {j} outside 1..{n}"
            )
    return combo


# ---------------------------------------------------------------------------
# The class table


class FactorClassTable:
    """Named class regions for all six factors.

    Immutable after construction; safe to share across worker processes.
    """

    def __init__(self, classes: dict):
        # classes: Factor -> list of (label, Region)
        missing = [f.label for f in FACTORS if f not in classes]
        if missing:
            raise ConfigurationError(f"table missing factors: {missing}")
        self._labels = {}
        self._regions = {}
        for factor in FACTORS:
            entries = list(classes[factor])
            if not entries:
                raise ConfigurationError(f"{factor.label} has no classes")
            labels = [str(lbl) for lbl, _ in entries]
            if len(set(labels)) != len(labels):
                raise ConfigurationError(f"duplicate class labels for {factor.label}")
            regions = []
            for lbl, region in entries:
                region.validate()
                regions.append(region)
            self._labels[factor] = tuple(labels)
            self._regions[factor] = tuple(regions)

    # -- lookups ------------------------------------------------------------

    def class_count(self, factor: Factor) -> int:
        return len(self._labels[factor])

    def class_counts(self) -> tuple:
        return tuple(self.class_count(f) for f in FACTORS)

    def labels(self, factor: Factor) -> tuple:
        return self._labels[factor]

    def label(self, factor: Factor, j: int) -> str:
        return self._labels[factor][j - 1]

    def region(self, factor: Factor, j: int) -> Region:
        """Region of class ``j`` (1-based) of ``factor``."""
        return self._regions[factor][j - 1]

    def regions(self, factor: Factor) -> tuple:
        return self._regions[factor]

    def combination_count(self) -> int:
        n = 1
        for f in FACTORS:
            n *= self.class_count(f)
        return n

    # -- config round-trip ----------------------------------------------------

    def to_config(self) -> dict:
        factors = {}
        for factor in FACTORS:
            entries = []
            for lbl, region in zip(self._labels[factor], self._regions[factor]):
                entries.append({"label": lbl, "region": _region_to_config(region)})
            factors[factor.label] = entries
        return {"schema": "factorbench-table/1", "factors": factors}

    @classmethod
    def from_config(cls, config: dict) -> "FactorClassTable":
        if config.get("schema") != "factorbench-table/1":
            raise ConfigurationError("not a factorbench table config")
        classes = {}
        for factor in FACTORS:
            entries = config.get("factors", {}).get(factor.label)
            if entries is None:
                raise ConfigurationError(f"table config missing {factor.label}")
            classes[factor] = [
                (e["label"], _region_from_config(e["region"])) for e in entries
            ]
        return cls(classes)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_config(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "FactorClassTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_config(json.load(fh))

    def __eq__(self, other):
        if not isinstance(other, FactorClassTable):
            return NotImplemented
        return self.to_config() == other.to_config()


def _region_to_config(region: Region) -> dict:
    if isinstance(region, Interval):
        return {"kind": "interval", "range": [region.lo, region.hi]}
    if isinstance(region, ModularInterval):
        return {"kind": "modular_interval", "degrees": [region.lo, region.hi]}
    if isinstance(region, Rect):
        return {"kind": "rect", "x": [region.lo_x, region.hi_x], "y": [region.lo_y, region.hi_y]}
    if isinstance(region, PairIntervals):
        return {
            "kind": "pair_intervals",
            "first": [region.lo1, region.hi1],
            "second": [region.lo2, region.hi2],
        }
    if isinstance(region, IndexSet):
        rng = region.as_range()
        if rng is not None:
            return {"kind": "index_set", "start": rng[0], "stop": rng[1]}
        return {"kind": "index_set", "ids": list(region.ids)}
    raise TypeError(f"unknown region type {type(region)}")


def _region_from_config(cfg: dict) -> Region:
    kind = cfg.get("kind")
    try:
        if kind == "interval":
            return Interval(*cfg["range"])
        if kind == "modular_interval":
            return ModularInterval(*cfg["degrees"])
        if kind == "rect":
            return Rect(cfg["x"][0], cfg["x"][1], cfg["y"][0], cfg["y"][1])
        if kind == "pair_intervals":
            return PairIntervals(
                cfg["first"][0], cfg["first"][1], cfg["second"][0], cfg["second"][1]
            )
        if kind == "index_set":
            if "ids" in cfg:
                return IndexSet(cfg["ids"])
            return IndexSet(range(cfg["start"], cfg["stop"]))
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigurationError(f"malformed region config {cfg!r}") from exc
    raise ConfigurationError(f"unknown region kind {kind!r}")


# ---------------------------------------------------------------------------
# Built-in table


#: Texture class names in asset-index order.
TEXTURE_NAMES = ("tiles", "wood", "carpet", "bricks", "lava")

_POSITION_BANDS = ((0.1, 0.3), (0.4, 0.6), (0.7, 0.9))
_POSITION_ROW_NAMES = ("top", "center", "bottom")
_POSITION_COL_NAMES = ("left", "center", "right")

_HUE_CLASSES = (
    ("red", ModularInterval(345.0, 15.0)),
    ("yellow", ModularInterval(45.0, 75.0)),
    ("green", ModularInterval(105.0, 135.0)),
    ("cyan", ModularInterval(175.0, 205.0)),
    ("blue", ModularInterval(235.0, 265.0)),
    ("magenta", ModularInterval(295.0, 325.0)),
)

_LIGHTNESS_CLASSES = (
    ("dark", PairIntervals(0.0, 0.1, 0.4, 0.5)),
    ("penumbra", PairIntervals(0.15, 0.25, 0.55, 0.65)),
    ("bright", PairIntervals(0.3, 0.4, 0.7, 0.8)),
    ("brilliant", PairIntervals(0.45, 0.55, 0.85, 0.95)),
)

_SCALE_CLASSES = (
    ("small", Interval(0.69, 0.74)),
    ("medium-small", Interval(0.86, 0.91)),
    ("medium", Interval(1.03, 1.08)),
    ("medium-large", Interval(1.20, 1.25)),
    ("large", Interval(1.40, 1.45)),
)


def default_table(shape_counts: Sequence[int] | None = None) -> FactorClassTable:
    """The built-in class table: 9 positions, 6 hues, 4 lightness ramps,
    5 scales, 10 digit shapes, 5 textures (54000 class combinations).

    ``shape_counts`` gives the per-digit instance count of the shape bank
    backing the table; it defaults to the canonical MNIST training split.
    Pass ``bank.class_counts`` when working with a different bank.
    """
    if shape_counts is None:
        shape_counts = MNIST_TRAIN_COUNTS
    shape_counts = [int(c) for c in shape_counts]
    if len(shape_counts) != 10 or any(c <= 0 for c in shape_counts):
        raise ConfigurationError("shape_counts must be 10 positive instance counts")

    position = []
    for r, row in enumerate(_POSITION_ROW_NAMES):
        for c, col in enumerate(_POSITION_COL_NAMES):
            name = "center" if (row, col) == ("center", "center") else f"{row}-{col}"
            (lo_x, hi_x) = _POSITION_BANDS[c]
            (lo_y, hi_y) = _POSITION_BANDS[r]
            position.append((name, Rect(lo_x, hi_x, lo_y, hi_y)))

    shape = []
    for digit, count in enumerate(shape_counts):
        start = digit * SHAPE_INDEX_STRIDE
        shape.append((str(digit), IndexSet(range(start, start + count))))

    texture = [(name, IndexSet([k])) for k, name in enumerate(TEXTURE_NAMES)]

    return FactorClassTable(
        {
            Factor.POSITION: position,
            Factor.HUE: list(_HUE_CLASSES),
            Factor.LIGHTNESS: list(_LIGHTNESS_CLASSES),
            Factor.SCALE: list(_SCALE_CLASSES),
            Factor.SHAPE: shape,
            Factor.TEXTURE: texture,
        }
    )


# ---------------------------------------------------------------------------
# Sampling and classification


def sample_realization(
    table: FactorClassTable, combination: Sequence[int], rng
) -> FactorRealization:
    """Draw one realization from the class regions named by ``combination``.

    Components are drawn in fixed factor order so the result is a pure
    function of (table, combination, generator state). The texture crop
    origin is drawn uniformly from [0, 1)^2 on top of the class's asset
    index.
    """
    rng = as_rng(rng)
    combo = validate_combination(table, combination)
    values = {}
    for factor, j in zip(FACTORS, combo):
        values[factor] = sample_from_region(table.region(factor, j), rng)
    origin = (float(rng.random()), float(rng.random()))
    return FactorRealization(
        position=values[Factor.POSITION],
        hue=values[Factor.HUE],
        lightness=values[Factor.LIGHTNESS],
        scale=values[Factor.SCALE],
        shape=values[Factor.SHAPE],
        texture=values[Factor.TEXTURE],
        texture_origin=origin,
    )


def class_of(table: FactorClassTable, realization: FactorRealization) -> ClassCombination:
    """The unique class combination whose regions contain the realization.

    Raises OutOfClassError if some component lies in no region of its
    factor. Region disjointness (a table invariant) guarantees uniqueness.
    """
    combo = []
    for factor in FACTORS:
        value = realization.component(factor)
        hits = [
            j
            for j in range(1, table.class_count(factor) + 1)
            if contains(table.region(factor, j), value)
        ]
        if not hits:
            raise OutOfClassError(
                f"{factor.label} value {value!r} is in no class region"
            )
        if len(hits) > 1:
            raise ConfigurationError(
                f"{factor.label} value {value!r} is in {len(hits)} regions; "
                "table regions must be disjoint"
            )
        combo.append(hits[0])
    return tuple(combo)
