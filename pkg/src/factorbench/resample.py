"""Image resampling primitives.

Two interpolation modes are used in the package: nearest-neighbor for
binary object masks (keeps them binary) and bilinear for continuous
images (probe input downsampling). Both use the half-pixel-center
convention: destination pixel ``i`` samples source coordinate
``(i + 0.5) * src/dst - 0.5``.
"""

from __future__ import annotations

import numpy as np


def _nearest_indices(dst: int, src: int) -> np.ndarray:
    centers = (np.arange(dst) + 0.5) * (src / dst)
    return np.clip(np.floor(centers).astype(np.intp), 0, src - 1)


def nearest_resize(image: np.ndarray, shape: tuple) -> np.ndarray:
    """Nearest-neighbor resize of the two leading axes to ``shape``."""
    h, w = int(shape[0]), int(shape[1])
    if h <= 0 or w <= 0:
        raise ValueError(f"target shape must be positive, got {(h, w)}")
    rows = _nearest_indices(h, image.shape[0])
    cols = _nearest_indices(w, image.shape[1])
    return image[np.ix_(rows, cols)]


def _linear_weights(dst: int, src: int):
    centers = (np.arange(dst) + 0.5) * (src / dst) - 0.5
    lo = np.floor(centers).astype(np.intp)
    frac = centers - lo
    lo0 = np.clip(lo, 0, src - 1)
    lo1 = np.clip(lo + 1, 0, src - 1)
    return lo0, lo1, frac


def bilinear_resize(image: np.ndarray, shape: tuple) -> np.ndarray:
    """Bilinear resize of the two leading axes to ``shape``.

    Trailing axes (e.g. a channel axis) are carried along unchanged.
    Returns float64 regardless of input dtype.
    """
    h, w = int(shape[0]), int(shape[1])
    if h <= 0 or w <= 0:
        raise ValueError(f"target shape must be positive, got {(h, w)}")
    img = np.asarray(image, dtype=np.float64)

    r0, r1, rf = _linear_weights(h, img.shape[0])
    c0, c1, cf = _linear_weights(w, img.shape[1])

    rf = rf.reshape((h,) + (1,) * (img.ndim - 1))
    rows = img[r0] * (1.0 - rf) + img[r1] * rf

    cf = cf.reshape((1, w) + (1,) * (img.ndim - 2))
    return rows[:, c0] * (1.0 - cf) + rows[:, c1] * cf
