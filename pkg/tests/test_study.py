from collections import Counter

import numpy as np
import pytest

from factorbench.errors import ConfigurationError, StudyDefinitionError
from factorbench.factors import FACTORS, Factor, default_table
from factorbench.seeding import rng_from
from factorbench.study import (
    CellPattern,
    Pairing,
    SplitCounts,
    StudyKind,
    balanced_counts,
    bookkeeping_correlate,
    cell_pattern,
    enumerate_pairings,
    materialize_split,
    select_dataset_samples,
)

TABLE = default_table()
PAIRING = Pairing(Factor.SHAPE, Factor.HUE)


def make_sample(seed=0):
    return select_dataset_samples(TABLE, seed, n_samples=1)[0]


# ---------------------------------------------------------------------------
# study kinds and pairings


def test_study_kind_parse():
    assert StudyKind.parse("zgo") == StudyKind("ZGO")
    assert StudyKind.parse("CGO-2") == StudyKind("CGO", 2)
    assert StudyKind.parse("FGO-5") == StudyKind("FGO", 5)
    assert str(StudyKind.parse("FGO-20")) == "FGO-20"


def test_study_kind_validation():
    with pytest.raises(ConfigurationError):
        StudyKind("CGO", 4)
    with pytest.raises(ConfigurationError):
        StudyKind("FGO", 7)
    with pytest.raises(ConfigurationError):
        StudyKind("ZGO", 1)
    with pytest.raises(ConfigurationError):
        StudyKind.parse("XYZ")


def test_enumerate_pairings():
    pairings = enumerate_pairings()
    assert len(pairings) == 30
    assert Pairing(Factor.SHAPE, Factor.HUE) in pairings
    assert Pairing(Factor.HUE, Factor.SHAPE) in pairings
    assert all(p.target is not p.correlate for p in pairings)
    assert len(set(pairings)) == 30


def test_pairing_parse_and_reject_same():
    p = Pairing.parse("shape:hue")
    assert p.target is Factor.SHAPE and p.correlate is Factor.HUE
    with pytest.raises(ConfigurationError):
        Pairing.parse("hue:hue")
    with pytest.raises(ConfigurationError):
        Pairing.parse("hue")


# ---------------------------------------------------------------------------
# dataset samples


def test_select_samples_deterministic():
    a = select_dataset_samples(TABLE, 123)
    b = select_dataset_samples(TABLE, 123)
    assert a == b
    assert [s.sample_id for s in a] == [1, 2, 3, 4, 5]


def test_selected_classes_distinct_and_reachable():
    for sample in select_dataset_samples(TABLE, 77):
        for factor in FACTORS:
            picks = sample.selected[factor]
            assert len(set(picks)) == 3
            assert all(1 <= j <= TABLE.class_count(factor) for j in picks)
        reachable = 1
        for factor in FACTORS:
            reachable *= len(sample.selected[factor])
        assert reachable == 3**6 == 729


def test_selection_frequency_uniform():
    # frequency oracle: each hue class should appear with rate 3/6
    hits = Counter()
    n_seeds = 1000
    for seed in range(n_seeds):
        sample = select_dataset_samples(TABLE, seed, n_samples=1)[0]
        hits.update(sample.selected[Factor.HUE])
    for j in range(1, 7):
        assert abs(hits[j] / n_seeds - 0.5) < 0.05


def test_sample_needs_three_classes():
    cfg = TABLE.to_config()
    cfg["factors"]["lightness"] = cfg["factors"]["lightness"][:2]
    from factorbench.factors import FactorClassTable

    small = FactorClassTable.from_config(cfg)
    with pytest.raises(ConfigurationError):
        select_dataset_samples(small, 0)


# ---------------------------------------------------------------------------
# cell patterns


def rng_for(sample, kind):
    return rng_from(sample.seed, "pattern", 5, 2, str(kind))


def test_zso_pattern():
    pattern = cell_pattern(StudyKind("ZSO"), make_sample())
    assert np.allclose(pattern.weights, 1 / 3)
    assert pattern.test_mask.all()
    assert len(pattern.test_cells) == 9


def test_zgo_pattern_cells():
    sample = make_sample()
    pattern = cell_pattern(StudyKind("ZGO"), sample, rng_for(sample, "ZGO"))
    assert len(pattern.train_cells) == 3
    assert len(pattern.test_cells) == 6
    for r in range(3):
        assert pattern.weights[r, pattern.bijection[r]] == 1.0
    assert not (pattern.test_mask & (pattern.weights > 0)).any()


def test_default_stream_reproduces_base_bijection():
    sample = make_sample(5)
    pattern = cell_pattern(StudyKind("ZGO"), sample)
    assert pattern.bijection == sample.base_bijection


def test_cgo_pattern_counts_and_holdout():
    for seed in range(40):
        sample = make_sample(seed)
        for c in (1, 2, 3):
            rng = rng_from(sample.seed, "pattern", 5, 2, f"CGO-{c}")
            pattern = cell_pattern(StudyKind("CGO", c), sample, rng)
            assert len(pattern.train_cells) == 3 + c
            assert len(pattern.test_cells) == 6 - c
            # every row keeps at least one held-out cell
            for r in range(3):
                assert pattern.test_mask[r].sum() >= 1
            # row weights uniform over active cells
            for r in range(3):
                active = pattern.weights[r][pattern.weights[r] > 0]
                assert np.allclose(active, 1.0 / len(active))


def test_cgo_monotone_nesting():
    for seed in range(20):
        sample = make_sample(seed)
        stream_seed = (sample.seed, "pattern", 5, 2)
        zgo = cell_pattern(StudyKind("ZGO"), sample, rng_from(*stream_seed))
        cells = [zgo.train_cells]
        for c in (1, 2, 3):
            pattern = cell_pattern(StudyKind("CGO", c), sample, rng_from(*stream_seed))
            cells.append(pattern.train_cells)
        for smaller, larger in zip(cells, cells[1:]):
            assert smaller < larger


def test_chgo_pattern():
    for seed in range(40):
        sample = make_sample(seed)
        rng = rng_from(sample.seed, "pattern", 5, 2, "CHGO")
        pattern = cell_pattern(StudyKind("CHGO"), sample, rng)
        assert len(pattern.train_cells) == 5
        assert len(pattern.test_cells) == 2
        (r_star,) = {r for r in range(3) if pattern.test_mask[r].any()}
        star_col = pattern.bijection[r_star]
        assert pattern.weights[r_star, star_col] == 1.0
        assert not pattern.test_mask[r_star, star_col]
        for r in range(3):
            if r != r_star:
                assert pattern.weights[r, star_col] == 0.0
                assert np.allclose(sorted(pattern.weights[r]), [0.0, 0.5, 0.5])


def test_fgo_pattern_weights():
    sample = make_sample(3)
    for f in (5, 10, 20):
        rng = rng_from(sample.seed, "pattern", 5, 2, f"FGO-{f}")
        pattern = cell_pattern(StudyKind("FGO", f), sample, rng)
        for r in range(3):
            row = sorted(pattern.weights[r])
            assert np.allclose(row, [f / 200, f / 200, 1 - f / 100])
        assert len(pattern.test_cells) == 6
        # FGO trains (lightly) on every cell
        assert (pattern.weights > 0).all()


def test_fgo20_rows_are_08_01_01():
    sample = make_sample(9)
    pattern = cell_pattern(StudyKind("FGO", 20), sample, rng_for(sample, "FGO-20"))
    for r in range(3):
        assert np.allclose(sorted(pattern.weights[r]), [0.1, 0.1, 0.8])


def test_pattern_invariants_over_seeds():
    kinds = [
        StudyKind("ZSO"),
        StudyKind("ZGO"),
        StudyKind("CGO", 1),
        StudyKind("CGO", 2),
        StudyKind("CGO", 3),
        StudyKind("CHGO"),
        StudyKind("FGO", 5),
        StudyKind("FGO", 10),
        StudyKind("FGO", 20),
    ]
    for seed in range(100):
        sample = make_sample(seed)
        for kind in kinds:
            pattern = cell_pattern(kind, sample, rng_from(sample.seed, "p", str(kind)))
            assert np.allclose(pattern.weights.sum(axis=1), 1.0)
            assert (pattern.weights >= 0).all()
            if kind.family == "ZGO":
                assert pattern.train_cells | pattern.test_cells == {
                    (r, c) for r in range(3) for c in range(3)
                }


def test_cell_pattern_validation():
    with pytest.raises(StudyDefinitionError):
        CellPattern(StudyKind("ZSO"), np.full((3, 3), 0.5), np.ones((3, 3), bool))
    with pytest.raises(StudyDefinitionError):
        CellPattern(StudyKind("ZSO"), np.full((3, 3), 1 / 3), np.zeros((3, 3), bool))


# ---------------------------------------------------------------------------
# split materialization


def test_balanced_counts():
    assert balanced_counts(900, 3) == [300, 300, 300]
    assert balanced_counts(10, 3) == [4, 3, 3]
    assert sum(balanced_counts(8748, 3)) == 8748


def test_split_counts_scaled():
    counts = SplitCounts.scaled(10)
    assert (counts.train, counts.val, counts.test) == (4374, 875, 1000)
    default = SplitCounts()
    assert (default.train, default.val, default.test) == (43740, 8748, 10000)


def test_zgo_train_900_gives_300_per_cell():
    sample = make_sample(1)
    pattern = cell_pattern(StudyKind("ZGO"), sample, rng_for(sample, "ZGO"))
    plan = materialize_split(
        pattern, sample, PAIRING, SplitCounts(train=900, val=90, test=90), rng_from(1)
    )
    cells = Counter(rec.cell for rec in plan.split("train"))
    assert len(cells) == 3
    assert all(v == 300 for v in cells.values())


def test_fgo5_train_frequencies_within_3_sigma():
    sample = make_sample(2)
    pattern = cell_pattern(StudyKind("FGO", 5), sample, rng_for(sample, "FGO-5"))
    plan = materialize_split(
        pattern, sample, PAIRING, SplitCounts(train=6000, val=60, test=60), rng_from(2)
    )
    cells = Counter(rec.cell for rec in plan.split("train"))
    n_row = 2000
    for r in range(3):
        diag = cells[(r, pattern.bijection[r])]
        sigma = np.sqrt(n_row * 0.95 * 0.05)
        assert abs(diag - 1900) <= 3 * sigma
        for c in range(3):
            if c != pattern.bijection[r]:
                sigma = np.sqrt(n_row * 0.025 * 0.975)
                assert abs(cells[(r, c)] - 50) <= 3 * sigma


def test_zso_val_matches_train_distribution():
    sample = make_sample(3)
    pattern = cell_pattern(StudyKind("ZSO"), sample)
    plan = materialize_split(
        pattern, sample, PAIRING, SplitCounts(train=9000, val=9000, test=90), rng_from(3)
    )
    train_cells = Counter(rec.cell for rec in plan.split("train"))
    val_cells = Counter(rec.cell for rec in plan.split("val"))
    # both are multinomial(1000 per cell expected); compare within 3 sigma
    sigma = np.sqrt(3000 * (1 / 3) * (2 / 3))
    for cell in {(r, c) for r in range(3) for c in range(3)}:
        assert abs(train_cells[cell] - val_cells[cell]) <= 3 * np.sqrt(2) * sigma


from hypothesis import given, settings
from hypothesis import strategies as st


@settings(max_examples=30, deadline=None)
@given(
    st.integers(3, 400),
    st.integers(1, 120),
    st.integers(2, 120),
    st.integers(0, 10),
)
def test_balance_property_over_counts(train, val, test, seed):
    sample = make_sample(seed)
    for kind in (StudyKind("ZSO"), StudyKind("ZGO"), StudyKind("FGO", 5)):
        pattern = cell_pattern(kind, sample, rng_for(sample, kind))
        plan = materialize_split(
            pattern, sample, PAIRING, SplitCounts(train, val, test), rng_from(seed)
        )
        for split in ("train", "val", "test"):
            counts = Counter(rec.target for rec in plan.split(split))
            assert max(counts.values()) - min(counts.values()) <= 1
            assert sum(counts.values()) == getattr(
                plan.counts, split if split != "val" else "val"
            )
        for rec in plan.split("test"):
            assert pattern.test_mask[rec.cell]


def test_balance_within_one_everywhere():
    sample = make_sample(4)
    for kind in (StudyKind("ZGO"), StudyKind("CHGO"), StudyKind("FGO", 20)):
        pattern = cell_pattern(kind, sample, rng_for(sample, kind))
        plan = materialize_split(
            pattern, sample, PAIRING, SplitCounts(train=1000, val=100, test=100), rng_from(4)
        )
        for split in ("train", "val", "test"):
            targets = Counter(rec.target for rec in plan.split(split))
            assert max(targets.values()) - min(targets.values()) <= 1


def test_test_split_only_uses_mask_cells():
    sample = make_sample(5)
    for kind in (StudyKind("ZGO"), StudyKind("CGO", 2), StudyKind("CHGO"), StudyKind("FGO", 10)):
        pattern = cell_pattern(kind, sample, rng_for(sample, kind))
        plan = materialize_split(
            pattern, sample, PAIRING, SplitCounts(train=90, val=30, test=300), rng_from(5)
        )
        for rec in plan.split("test"):
            assert pattern.test_mask[rec.cell]


def test_records_respect_selected_classes():
    sample = make_sample(6)
    pattern = cell_pattern(StudyKind("ZGO"), sample, rng_for(sample, "ZGO"))
    plan = materialize_split(
        pattern, sample, PAIRING, SplitCounts(train=90, val=30, test=60), rng_from(6)
    )
    for split in ("train", "val", "test"):
        for rec in plan.split(split):
            for factor, j in zip(FACTORS, rec.combination):
                assert j in sample.selected[factor]
            # target label encodes the slot of the target class
            assert rec.combination[PAIRING.target.value - 1] == sample.selected[
                PAIRING.target
            ][rec.target]
            # the cell column encodes the correlate slot
            assert rec.combination[PAIRING.correlate.value - 1] == sample.selected[
                PAIRING.correlate
            ][rec.cell[1]]


def test_materialize_deterministic():
    sample = make_sample(7)
    pattern = cell_pattern(StudyKind("FGO", 10), sample, rng_for(sample, "FGO-10"))
    a = materialize_split(pattern, sample, PAIRING, SplitCounts(90, 30, 30), rng_from(7))
    b = materialize_split(pattern, sample, PAIRING, SplitCounts(90, 30, 30), rng_from(7))
    assert a.records == b.records


def test_bookkeeping_correlate():
    assert bookkeeping_correlate(Factor.POSITION) is Factor.HUE
    assert bookkeeping_correlate(Factor.HUE) is Factor.POSITION
