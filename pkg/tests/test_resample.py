import numpy as np

from factorbench.resample import bilinear_resize, nearest_resize


def test_nearest_identity():
    img = np.random.default_rng(0).random((10, 7))
    assert np.array_equal(nearest_resize(img, (10, 7)), img)


def test_nearest_keeps_binary():
    mask = np.random.default_rng(1).random((20, 13)) > 0.5
    out = nearest_resize(mask, (45, 29))
    assert out.dtype == bool
    assert set(np.unique(out)) <= {False, True}


def test_nearest_upscale_keeps_tight_masks_tight():
    # upscaling samples every source row/column at least once
    mask = np.zeros((20, 14), dtype=bool)
    mask[0, 3] = mask[-1, 5] = mask[7, 0] = mask[9, -1] = mask[10, 7] = True
    for target in [(45, 32), (60, 60), (21, 15)]:
        out = nearest_resize(mask, target)
        assert out[0].any() and out[-1].any()
        assert out[:, 0].any() and out[:, -1].any()


def test_nearest_one_step_downscale_skips_only_middle():
    # the renderer's only downscale is 45 -> 44: the skipped source
    # index sits mid-span, so bounding-box edges survive
    sampled_rows = sorted({int((i + 0.5) * 45 / 44) for i in range(44)})
    skipped = set(range(45)) - set(sampled_rows)
    assert len(skipped) == 1
    assert {0, 44} <= set(sampled_rows)
    assert 10 < next(iter(skipped)) < 35


def test_bilinear_identity():
    img = np.random.default_rng(2).random((9, 9, 3))
    assert np.allclose(bilinear_resize(img, (9, 9)), img)


def test_bilinear_constant_preserved():
    img = np.full((16, 16, 3), 0.3)
    out = bilinear_resize(img, (5, 7))
    assert np.allclose(out, 0.3)


def test_bilinear_2x_upsample_midpoints():
    # upsampling a 2-pixel ramp: interior samples interpolate linearly
    img = np.array([[0.0, 1.0]])
    out = bilinear_resize(img, (1, 4))
    assert np.allclose(out, [[0.0, 0.25, 0.75, 1.0]])


def test_bilinear_downsample_average():
    # 2x downsample of a 2x2 checkerboard averages to 0.5
    img = np.array([[0.0, 1.0], [1.0, 0.0]])
    out = bilinear_resize(img, (1, 1))
    assert np.allclose(out, 0.5)


def test_bilinear_range_bounded():
    img = np.random.default_rng(3).random((128, 128, 3))
    out = bilinear_resize(img, (32, 32))
    assert out.min() >= 0.0 and out.max() <= 1.0
