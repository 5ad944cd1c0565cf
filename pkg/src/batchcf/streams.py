"""Labeled, splittable random streams.

Every stochastic component draws from its own counter-based generator keyed
by (master seed, component label, *ids).  Adding a new component or changing
iteration order never perturbs the draws of an existing one.
"""

from __future__ import annotations

import zlib

import numpy as np


def _entropy_word(label) -> int:
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    if isinstance(label, (int, np.integer)):
        # map signed ints into the nonnegative range SeedSequence accepts
        return int(label) & 0xFFFFFFFFFFFFFFFF
    raise TypeError(f"stream labels must be str or int, got {type(label)!r}")


def stream(master_seed: int, *labels) -> np.random.Generator:
    """Generator for component `labels` under `master_seed`."""
    words = [_entropy_word(master_seed)] + [_entropy_word(x) for x in labels]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
