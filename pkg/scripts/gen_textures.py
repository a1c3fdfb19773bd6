#!/usr/bin/env python3
"""Generate the five bundled stand-in textures.

The benchmark needs five grayscale texture images with rich value
histograms. This script synthesizes deterministic procedural stand-ins
(tiles, wood, carpet, bricks, lava) at 256x256 and writes them into the
package data directory. Re-running reproduces the files exactly.
"""

import sys
from pathlib import Path

import numpy as np
from PIL import Image

SIDE = 256
OUT = Path(__file__).resolve().parent.parent / "src" / "factorbench" / "assets_data" / "textures"


def _norm(a):
    a = a - a.min()
    return a / a.max()


def _smooth(a, passes=2):
    for _ in range(passes):
        a = (
            a
            + np.roll(a, 1, 0)
            + np.roll(a, -1, 0)
            + np.roll(a, 1, 1)
            + np.roll(a, -1, 1)
        ) / 5.0
    return a


def tiles(rng):
    yy, xx = np.mgrid[0:SIDE, 0:SIDE]
    tile = 32
    ty, tx = yy // tile, xx // tile
    base = rng.random((SIDE // tile + 1, SIDE // tile + 1))
    field = base[ty, tx]
    # per-tile diagonal shading plus thin dark seams
    frac_y, frac_x = (yy % tile) / tile, (xx % tile) / tile
    shading = 0.35 * (frac_x + frac_y) / 2.0
    seams = ((yy % tile < 2) | (xx % tile < 2)) * -0.45
    noise = 0.08 * rng.standard_normal((SIDE, SIDE))
    return _norm(field * 0.6 + shading + seams + noise)


def wood(rng):
    yy, xx = np.mgrid[0:SIDE, 0:SIDE]
    warp = _smooth(rng.standard_normal((SIDE, SIDE)), 6) * 18
    grain = np.sin((xx + warp) * (2 * np.pi / 24.0)) + 0.4 * np.sin(
        (xx + 0.35 * yy + warp) * (2 * np.pi / 7.0)
    )
    noise = 0.25 * _smooth(rng.standard_normal((SIDE, SIDE)), 1)
    return _norm(grain + noise)


def carpet(rng):
    fibers = _smooth(rng.standard_normal((SIDE, SIDE)), 1)
    tufts = _smooth(rng.standard_normal((SIDE, SIDE)), 5)
    return _norm(0.7 * fibers + tufts)


def bricks(rng):
    yy, xx = np.mgrid[0:SIDE, 0:SIDE]
    course_h, brick_w = 24, 48
    row = yy // course_h
    offset = (row % 2) * (brick_w // 2)
    col = (xx + offset) // brick_w
    per_brick = rng.random((SIDE // course_h + 2, SIDE // brick_w + 2))
    field = per_brick[row, col]
    mortar = ((yy % course_h < 3) | ((xx + offset) % brick_w < 3)) * -0.5
    speckle = 0.12 * rng.standard_normal((SIDE, SIDE))
    grad = 0.2 * (yy % course_h) / course_h
    return _norm(field * 0.7 + mortar + speckle + grad)


def lava(rng):
    yy, xx = np.mgrid[0:SIDE, 0:SIDE].astype(float)
    field = np.zeros((SIDE, SIDE))
    for _ in range(8):
        fy, fx = rng.uniform(0.5, 3.0, size=2)
        phase = rng.uniform(0, 2 * np.pi, size=2)
        field += rng.uniform(0.4, 1.0) * np.sin(
            2 * np.pi * (fy * yy / SIDE) + phase[0]
        ) * np.sin(2 * np.pi * (fx * xx / SIDE) + phase[1])
    cracks = np.abs(_smooth(rng.standard_normal((SIDE, SIDE)), 8))
    return _norm(field - 2.5 * (cracks < 0.02) + 0.15 * rng.standard_normal((SIDE, SIDE)))


def main():
    rng = np.random.default_rng(20240)
    OUT.mkdir(parents=True, exist_ok=True)
    for name, maker in (
        ("tiles", tiles),
        ("wood", wood),
        ("carpet", carpet),
        ("bricks", bricks),
        ("lava", lava),
    ):
        tex = maker(rng)
        arr = np.clip(np.round(tex * 255), 0, 255).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(OUT / f"{name}.png", compress_level=9)
        print(f"wrote {OUT / f'{name}.png'} levels={len(np.unique(arr))}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
