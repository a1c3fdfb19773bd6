"""Deterministic seed derivation.

Every random decision in the package is funneled through one master seed.
Child streams are derived with a splitmix64-style mixer so that any single
artifact (a dataset sample, a record, an image) is reproducible in isolation
without replaying the streams that precede it.

Constants (64-bit, all arithmetic mod 2**64):

* splitmix64 increment ``0x9E3779B97F4A7C15`` (golden-ratio constant)
* finalizer multipliers ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``
* string keys are folded in with FNV-1a (offset ``0xCBF29CE484222325``,
  prime ``0x100000001B3``)
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 step: advance by the golden-ratio increment and mix."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    """FNV-1a hash of a UTF-8 string; used for named sub-streams."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def derive_seed(seed: int, *keys: int | str) -> int:
    """Derive a child seed from ``seed`` and a path of integer/string keys.

    The derivation is order-sensitive and collision-resistant enough for
    stream separation: each key is mixed into the running state with
    splitmix64 after xoring in either the integer value or the FNV-1a hash
    of the string.
    """
    state = splitmix64(seed & _MASK64)
    for key in keys:
        if isinstance(key, str):
            k = fnv1a64(key)
        else:
            k = key & _MASK64
        state = splitmix64(state ^ splitmix64(k))
    return state


def rng_from(seed: int, *keys: int | str) -> np.random.Generator:
    """A numpy Generator seeded from ``derive_seed(seed, *keys)``."""
    return np.random.default_rng(derive_seed(seed, *keys))


def as_rng(rng_or_seed) -> np.random.Generator:
    """Accept either a Generator or an integer seed; return a Generator."""
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return np.random.default_rng(int(rng_or_seed))
