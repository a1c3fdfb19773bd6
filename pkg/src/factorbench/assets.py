"""Raw visual material: binary shape masks and grayscale textures.

Shapes come from an IDX-format digit dataset (MNIST layout): each image is
thresholded into a binary mask, cropped to its bounding box and rescaled so
its long side is :data:`NORMALIZED_LONG_SIDE` pixels. Textures are PNG
images converted to grayscale and histogram-equalized so their value
distribution is approximately uniform.

Banks are immutable after loading; concurrent readers are safe.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import AssetError, CropError, IdxParseError
from .factors import SHAPE_INDEX_STRIDE, TEXTURE_NAMES
from .resample import nearest_resize
from .seeding import as_rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

#: Side of the square canvas that object masks are normalized against.
MASK_CANVAS_SIDE = 64

#: Long side of a normalized mask: 64 / sqrt(2) rounded down, the largest
#: size whose every rotation still fits on the 64 px canvas.
NORMALIZED_LONG_SIDE = int(MASK_CANVAS_SIDE / np.sqrt(2.0))  # 45

#: Threshold for binarizing 8-bit digit images: strictly above the midpoint.
MASK_THRESHOLD = 127

#: Grayscale conversion weights for the R, G, B channels (Rec. 709 luma).
LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)


# ---------------------------------------------------------------------------
# IDX file format


def _read_exact(fh, n, what, offset):
    data = fh.read(n)
    if len(data) != n:
        raise IdxParseError(f"truncated IDX file while reading {what}", offset + len(data))
    return data


def read_idx_images(path) -> np.ndarray:
    """Parse an IDX image file into a uint8 array of shape (n, rows, cols)."""
    with open(path, "rb") as fh:
        (magic,) = struct.unpack(">I", _read_exact(fh, 4, "magic", 0))
        if magic != IDX_IMAGES_MAGIC:
            raise IdxParseError(f"bad IDX image magic 0x{magic:08x}", 0)
        n, rows, cols = struct.unpack(">III", _read_exact(fh, 12, "dimensions", 4))
        payload = _read_exact(fh, n * rows * cols, "pixel data", 16)
        if fh.read(1):
            raise IdxParseError("trailing bytes after pixel data", 16 + n * rows * cols)
    return np.frombuffer(payload, dtype=np.uint8).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    """Parse an IDX label file into a uint8 array of shape (n,)."""
    with open(path, "rb") as fh:
        (magic,) = struct.unpack(">I", _read_exact(fh, 4, "magic", 0))
        if magic != IDX_LABELS_MAGIC:
            raise IdxParseError(f"bad IDX label magic 0x{magic:08x}", 0)
        (n,) = struct.unpack(">I", _read_exact(fh, 4, "count", 4))
        payload = _read_exact(fh, n, "label data", 8)
        if fh.read(1):
            raise IdxParseError("trailing bytes after label data", 8 + n)
    return np.frombuffer(payload, dtype=np.uint8)


def write_idx_images(images: np.ndarray, path):
    images = np.ascontiguousarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(labels: np.ndarray, path):
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


# ---------------------------------------------------------------------------
# Shapes


def normalize_mask(mask: np.ndarray, long_side: int = NORMALIZED_LONG_SIDE) -> np.ndarray:
    """Crop a binary mask to its bounding box and rescale (nearest-neighbor)
    so that max(height, width) == long_side."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise AssetError("empty mask after threshold")
    tight = mask[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1]
    h, w = tight.shape
    longest = max(h, w)
    new_h = max(1, int(round(h * long_side / longest)))
    new_w = max(1, int(round(w * long_side / longest)))
    return nearest_resize(tight, (new_h, new_w))


class ShapeBank:
    """Binary object masks grouped into 10 digit classes.

    A mask is addressed by a stride-encoded asset index
    ``digit * SHAPE_INDEX_STRIDE + instance``.
    """

    def __init__(self, masks_per_class):
        if len(masks_per_class) != 10:
            raise AssetError(f"expected 10 shape classes, got {len(masks_per_class)}")
        self._masks = [list(group) for group in masks_per_class]
        for digit, group in enumerate(self._masks):
            if not group:
                raise AssetError(f"shape class {digit} has no instances")

    @property
    def class_counts(self) -> tuple:
        return tuple(len(g) for g in self._masks)

    @property
    def total(self) -> int:
        return sum(self.class_counts)

    def mask(self, asset_index: int) -> np.ndarray:
        digit, instance = divmod(int(asset_index), SHAPE_INDEX_STRIDE)
        if not 0 <= digit < 10 or instance >= len(self._masks[digit]):
            raise AssetError(f"shape asset index {asset_index} outside the bank")
        return self._masks[digit][instance]

    def label_of(self, asset_index: int) -> int:
        digit = int(asset_index) // SHAPE_INDEX_STRIDE
        if not 0 <= digit < 10:
            raise AssetError(f"shape asset index {asset_index} outside the bank")
        return digit


def load_mnist(images_path, labels_path, threshold: int = MASK_THRESHOLD) -> ShapeBank:
    """Load an IDX image/label pair into a ShapeBank.

    Pixels strictly above ``threshold`` are foreground. Every digit image
    must contain at least one foreground pixel.
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise AssetError(
            f"image/label count mismatch: {images.shape[0]} images vs "
            f"{labels.shape[0]} labels"
        )
    if labels.size and labels.max() > 9:
        raise AssetError(f"label {labels.max()} outside digit range 0..9")
    groups = [[] for _ in range(10)]
    for img, label in zip(images, labels):
        groups[int(label)].append(normalize_mask(img > threshold))
    return ShapeBank(groups)


# ---------------------------------------------------------------------------
# Textures


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Collapse an RGB [0,1] image to one channel with Rec. 709 weights."""
    if image.ndim == 2:
        return np.asarray(image, dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    return r * image[..., 0] + g * image[..., 1] + b * image[..., 2]


def equalize_histogram(image: np.ndarray, bins: int = 256) -> np.ndarray:
    """Histogram-equalize a [0,1] grayscale image over ``bins`` levels.

    Output spans [0, 1] exactly (minimum bin maps to 0, maximum to 1).
    A constant image is returned unchanged: its single-bin histogram
    leaves no room for equalization.
    """
    img = np.asarray(image, dtype=np.float64)
    quantized = np.clip(np.round(img * (bins - 1)).astype(np.intp), 0, bins - 1)
    hist = np.bincount(quantized.ravel(), minlength=bins)
    cdf = np.cumsum(hist)
    cdf_min = cdf[np.flatnonzero(hist)[0]]
    total = cdf[-1]
    if total == cdf_min:
        return img.copy()
    mapping = (cdf - cdf_min) / (total - cdf_min)
    return mapping[quantized]


class TextureBank:
    """Named grayscale textures with approximately uniform value histograms."""

    MIN_SIDE = 128

    def __init__(self, textures, names):
        if len(textures) != len(names):
            raise AssetError("texture/name count mismatch")
        for name, tex in zip(names, textures):
            if tex.ndim != 2 or min(tex.shape) < self.MIN_SIDE:
                raise AssetError(
                    f"texture {name!r} must be at least "
                    f"{self.MIN_SIDE}x{self.MIN_SIDE} grayscale"
                )
        self._textures = [np.asarray(t, dtype=np.float64) for t in textures]
        self.names = tuple(names)

    def __len__(self):
        return len(self._textures)

    def texture(self, index: int) -> np.ndarray:
        if not 0 <= index < len(self._textures):
            raise AssetError(f"texture index {index} outside the bank")
        return self._textures[index]

    def crop_at(self, index: int, height: int, width: int, origin) -> np.ndarray:
        """Deterministic crop with a normalized (x, y) origin in [0, 1).

        The origin picks uniformly among all valid top-left corners, so
        origin 0 is the top-left crop and any origin works for a crop of
        the full texture size.
        """
        tex = self.texture(index)
        th, tw = tex.shape
        if height > th or width > tw:
            raise CropError(
                f"crop {height}x{width} exceeds texture {self.names[index]!r} "
                f"({th}x{tw})"
            )
        ox, oy = origin
        row = min(int(oy * (th - height + 1)), th - height)
        col = min(int(ox * (tw - width + 1)), tw - width)
        return tex[row : row + height, col : col + width]


def load_textures(directory, names=TEXTURE_NAMES) -> TextureBank:
    """Load, grayscale and equalize the named ``<name>.png`` textures."""
    directory = Path(directory)
    textures = []
    for name in names:
        path = directory / f"{name}.png"
        if not path.exists():
            raise AssetError(f"texture {name!r} not found at {path}")
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        textures.append(equalize_histogram(to_grayscale(arr)))
    return TextureBank(textures, names)


def sample_crop(bank: TextureBank, texture_index: int, size: int, rng) -> np.ndarray:
    """Uniformly random square crop of side ``size`` from one texture."""
    rng = as_rng(rng)
    tex = bank.texture(texture_index)
    th, tw = tex.shape
    if size > th or size > tw:
        raise CropError(f"crop size {size} exceeds texture dimensions {tex.shape}")
    row = int(rng.integers(th - size + 1))
    col = int(rng.integers(tw - size + 1))
    return tex[row : row + size, col : col + size]
