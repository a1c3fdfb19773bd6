import numpy as np
import pytest
from synthetic_digits import make_digit_dataset

from factorbench.assets import (
    MASK_CANVAS_SIDE,
    NORMALIZED_LONG_SIDE,
    equalize_histogram,
    load_mnist,
    normalize_mask,
    read_idx_images,
    read_idx_labels,
    sample_crop,
    to_grayscale,
    write_idx_images,
    write_idx_labels,
)
from factorbench.errors import AssetError, CropError, IdxParseError


# ---------------------------------------------------------------------------
# IDX format


def test_idx_round_trip_byte_exact(tmp_path):
    images, labels = make_digit_dataset(per_class=3)
    ip, lp = tmp_path / "im", tmp_path / "lb"
    write_idx_images(images, ip)
    write_idx_labels(labels, lp)
    parsed_images = read_idx_images(ip)
    parsed_labels = read_idx_labels(lp)
    assert np.array_equal(parsed_images, images)
    assert np.array_equal(parsed_labels, labels)
    # re-serialize and compare bytes
    ip2, lp2 = tmp_path / "im2", tmp_path / "lb2"
    write_idx_images(parsed_images, ip2)
    write_idx_labels(parsed_labels, lp2)
    assert ip.read_bytes() == ip2.read_bytes()
    assert lp.read_bytes() == lp2.read_bytes()


def test_idx_bad_magic(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(b"\x00\x00\x08\x99" + b"\x00" * 12)
    with pytest.raises(IdxParseError) as err:
        read_idx_images(path)
    assert err.value.offset == 0


def test_idx_truncated_reports_offset(tmp_path):
    images, _ = make_digit_dataset(per_class=1)
    path = tmp_path / "im"
    write_idx_images(images, path)
    data = path.read_bytes()
    path.write_bytes(data[:100])
    with pytest.raises(IdxParseError) as err:
        read_idx_images(path)
    assert "truncated" in str(err.value)
    assert err.value.offset == 100


def test_idx_label_magic_check(tmp_path):
    images, _ = make_digit_dataset(per_class=1)
    ip = tmp_path / "im"
    write_idx_images(images, ip)
    with pytest.raises(IdxParseError):
        read_idx_labels(ip)  # image magic where labels expected


# ---------------------------------------------------------------------------
# shape bank


def test_load_groups_ten_classes(idx_paths, shape_bank):
    assert len(shape_bank.class_counts) == 10
    assert shape_bank.class_counts == (60,) * 10
    assert shape_bank.total == 600


def test_masks_normalized_long_side(shape_bank):
    # oracle: recompute the bounding box of every stored mask
    assert NORMALIZED_LONG_SIDE == int(MASK_CANVAS_SIDE / np.sqrt(2)) == 45
    for digit in range(10):
        for k in range(0, 60, 7):
            mask = shape_bank.mask(digit * 100_000 + k)
            rows = np.flatnonzero(mask.any(axis=1))
            cols = np.flatnonzero(mask.any(axis=0))
            h = rows[-1] - rows[0] + 1
            w = cols[-1] - cols[0] + 1
            assert max(h, w) == 45
            assert (h, w) == mask.shape  # stored masks stay object-tight


def test_all_zero_image_is_rejected(tmp_path):
    images = np.zeros((1, 28, 28), dtype=np.uint8)
    labels = np.zeros(1, dtype=np.uint8)
    write_idx_images(images, tmp_path / "im")
    write_idx_labels(labels, tmp_path / "lb")
    with pytest.raises(AssetError, match="empty mask after threshold"):
        load_mnist(tmp_path / "im", tmp_path / "lb")


def test_count_mismatch_rejected(tmp_path):
    images, labels = make_digit_dataset(per_class=2)
    write_idx_images(images, tmp_path / "im")
    write_idx_labels(labels[:-1], tmp_path / "lb")
    with pytest.raises(AssetError, match="mismatch"):
        load_mnist(tmp_path / "im", tmp_path / "lb")


def test_normalize_mask_thin_stroke():
    mask = np.zeros((28, 28), dtype=bool)
    mask[4:24, 13:15] = True  # 20x2 bar
    out = normalize_mask(mask)
    assert out.shape[0] == 45
    assert 1 <= out.shape[1] <= 6
    assert out.dtype == bool and out.any()


def test_shape_bank_index_validation(shape_bank):
    with pytest.raises(AssetError):
        shape_bank.mask(60)  # digit 0 has 60 instances: 0..59
    with pytest.raises(AssetError):
        shape_bank.mask(11 * 100_000)


# ---------------------------------------------------------------------------
# equalization


def test_equalize_constant_image_unchanged():
    img = np.full((16, 16), 0.37)
    out = equalize_histogram(img)
    assert np.allclose(out, img)


def test_equalize_linear_ramp_identity():
    # a perfect 256-level ramp has a linear CDF: equalization is the identity
    ramp = np.tile(np.arange(256) / 255.0, (4, 1))
    out = equalize_histogram(ramp)
    assert np.allclose(out, ramp, atol=1e-12)


def test_equalize_output_range(texture_bank):
    for k in range(len(texture_bank)):
        tex = texture_bank.texture(k)
        assert tex.min() == 0.0
        assert tex.max() == 1.0


def test_equalized_mean_near_half(texture_bank):
    for k in range(len(texture_bank)):
        assert 0.45 <= texture_bank.texture(k).mean() <= 0.55


def test_equalized_chi2_loose_uniformity(texture_bank):
    for k in range(len(texture_bank)):
        tex = texture_bank.texture(k)
        hist, _ = np.histogram(tex, bins=16, range=(0, 1))
        expected = tex.size / 16
        chi2 = ((hist - expected) ** 2 / expected).sum()
        assert chi2 < 1000, f"texture {texture_bank.names[k]} chi2={chi2:.0f}"


def test_equalize_matches_opencv_oracle():
    # independent implementation oracle: OpenCV's equalizeHist agrees
    # exactly after 8-bit quantization
    cv2 = pytest.importorskip("cv2")
    rng = np.random.default_rng(0)
    for _ in range(5):
        img8 = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
        img8 = (img8.astype(float) ** 1.7 / 255**0.7).astype(np.uint8)
        ours = np.round(equalize_histogram(img8 / 255.0) * 255).astype(int)
        theirs = cv2.equalizeHist(img8).astype(int)
        assert np.array_equal(ours, theirs)


def test_grayscale_weights():
    rgb = np.zeros((2, 2, 3))
    rgb[..., 0] = 1.0
    assert np.allclose(to_grayscale(rgb), 0.2126)
    rgb = np.ones((2, 2, 3))
    assert np.allclose(to_grayscale(rgb), 1.0)


def test_texture_bank_size_guard(texture_bank):
    for k in range(len(texture_bank)):
        assert min(texture_bank.texture(k).shape) >= 128


def test_texture_missing_file(tmp_path):
    with pytest.raises(AssetError, match="tiles"):
        from factorbench.assets import load_textures

        load_textures(tmp_path)


# ---------------------------------------------------------------------------
# crops


def test_sample_crop_deterministic(texture_bank):
    a = sample_crop(texture_bank, 0, 45, np.random.default_rng(9))
    b = sample_crop(texture_bank, 0, 45, np.random.default_rng(9))
    assert a.shape == (45, 45)
    assert np.array_equal(a, b)


def test_sample_crop_full_size(texture_bank):
    tex = texture_bank.texture(2)
    crop = sample_crop(texture_bank, 2, tex.shape[0], np.random.default_rng(0))
    assert np.array_equal(crop, tex)


def test_sample_crop_matches_parent_pixels(texture_bank):
    # pixel-equality oracle: the crop must appear verbatim in the texture
    tex = texture_bank.texture(1)
    crop = sample_crop(texture_bank, 1, 64, np.random.default_rng(4))
    candidates = np.argwhere(tex == crop[0, 0])
    found = any(
        r + 64 <= tex.shape[0]
        and c + 64 <= tex.shape[1]
        and np.array_equal(tex[r : r + 64, c : c + 64], crop)
        for r, c in candidates
    )
    assert found


def test_sample_crop_too_large(texture_bank):
    with pytest.raises(CropError):
        sample_crop(texture_bank, 0, 10_000, np.random.default_rng(0))


def test_crop_at_origin_mapping(texture_bank):
    tex = texture_bank.texture(3)
    crop = texture_bank.crop_at(3, 40, 40, (0.0, 0.0))
    assert np.array_equal(crop, tex[:40, :40])
    crop = texture_bank.crop_at(3, 40, 40, (0.999999, 0.999999))
    assert np.array_equal(crop, tex[-40:, -40:])
