"""The image-generating function: realization -> 128x128 RGB image.

Rendering pipeline:

1. fetch the normalized binary mask of the shape asset (long side 45 px),
2. rescale it (nearest-neighbor) so its long side is ``round(64 * scale)``,
3. crop the texture at the post-scale object size (the texture is *not*
   rescaled with the object, which keeps texture frequency independent of
   the scale factor) and colorize it as a ramp between two colors of the
   sampled hue,
4. composite onto a constant grey background through the mask,
5. place the object so that the normalized position sweeps the feasible
   placement range: the top-left corner of the object box lands at
   ``round(pos * (128 - object_side))`` per axis. Position (0.5, 0.5)
   centers the object, position 0/1 touches the image border, and any
   object up to the full image side always fits.

All randomness lives in the realization, so the function is pure:
identical inputs give bit-identical images.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .assets import MASK_CANVAS_SIDE, ShapeBank, TextureBank
from .errors import PlacementError
from .factors import FactorClassTable, FactorRealization
from .resample import nearest_resize

#: Output image side in pixels.
IMAGE_SIDE = 128

#: Constant grey value of background pixels, in [0, 1].
BACKGROUND_VALUE = 0.5

#: Object pixels are saturated: only hue and lightness vary.
SATURATION = 1.0

#: zlib level used when encoding PNGs; fixed so exports are reproducible.
PNG_COMPRESS_LEVEL = 6


def hsl_to_rgb(h: float, s: float, l: float) -> tuple:
    """Standard HSL to RGB conversion.

    ``h`` in degrees (reduced mod 360), ``s`` and ``l`` clamped to [0, 1].
    Returns an (r, g, b) tuple of floats in [0, 1].
    """
    h = float(h) % 360.0
    s = min(max(float(s), 0.0), 1.0)
    l = min(max(float(l), 0.0), 1.0)
    c = (1.0 - abs(2.0 * l - 1.0)) * s
    hp = h / 60.0
    x = c * (1.0 - abs(hp % 2.0 - 1.0))
    m = l - c / 2.0
    sector = int(hp)
    rgb1 = (
        (c, x, 0.0),
        (x, c, 0.0),
        (0.0, c, x),
        (0.0, x, c),
        (x, 0.0, c),
        (c, 0.0, x),
    )[min(sector, 5)]
    # m can undershoot 0 by one ulp; keep the [0, 1] contract exact
    return tuple(min(max(v + m, 0.0), 1.0) for v in rgb1)


def colorize(texture_patch: np.ndarray, hue: float, lightness: tuple) -> np.ndarray:
    """Map a [0,1] grayscale patch onto a two-color ramp of one hue.

    The patch value is the convex-combination coefficient between the
    darker color (lightness ``l1``) and the brighter color (``l2``),
    both fully saturated.
    """
    l1, l2 = lightness
    if l1 > l2:
        raise ValueError(f"lightness pair must be ordered, got ({l1}, {l2})")
    color_lo = np.array(hsl_to_rgb(hue, SATURATION, l1))
    color_hi = np.array(hsl_to_rgb(hue, SATURATION, l2))
    t = np.asarray(texture_patch, dtype=np.float64)[..., None]
    return color_lo + t * (color_hi - color_lo)


def render(
    table: FactorClassTable | None,
    realization: FactorRealization,
    shape_bank: ShapeBank,
    texture_bank: TextureBank,
    rng=None,
) -> np.ndarray:
    """Render one realization into an IMAGE_SIDE^2 RGB image in [0, 1].

    ``table`` and ``rng`` are accepted for interface symmetry with the
    sampling side; the render itself is deterministic and does not draw
    random numbers. Raises PlacementError when the scaled object cannot
    fit inside the frame (impossible with the built-in table, reachable
    with custom tables whose scale regions exceed 2.0).
    """
    mask = shape_bank.mask(realization.shape)
    h, w = mask.shape
    side = int(round(MASK_CANVAS_SIDE * realization.scale))
    longest = max(h, w)
    obj_h = max(1, int(round(h * side / longest)))
    obj_w = max(1, int(round(w * side / longest)))
    if obj_h > IMAGE_SIDE or obj_w > IMAGE_SIDE:
        raise PlacementError(
            f"object {obj_h}x{obj_w} at scale {realization.scale:.3f} "
            f"exceeds the {IMAGE_SIDE}px frame"
        )
    obj_mask = nearest_resize(mask, (obj_h, obj_w))

    crop = texture_bank.crop_at(
        realization.texture, obj_h, obj_w, realization.texture_origin
    )
    patch = colorize(crop, realization.hue, realization.lightness)

    px, py = realization.position
    corner_x = int(round(px * (IMAGE_SIDE - obj_w)))
    corner_y = int(round(py * (IMAGE_SIDE - obj_h)))

    image = np.full((IMAGE_SIDE, IMAGE_SIDE, 3), BACKGROUND_VALUE, dtype=np.float64)
    window = image[corner_y : corner_y + obj_h, corner_x : corner_x + obj_w]
    window[obj_mask] = patch[obj_mask]
    return image


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize a [0,1] image to 8-bit: value = round(255 * v)."""
    return np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)


def save_png(image: np.ndarray, path):
    """Encode a [0,1] RGB image as an 8-bit PNG without alpha."""
    Image.fromarray(to_uint8(image), mode="RGB").save(
        path, format="PNG", compress_level=PNG_COMPRESS_LEVEL
    )


def load_png(path) -> np.ndarray:
    """Decode an 8-bit RGB PNG back to a [0,1] float image."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
