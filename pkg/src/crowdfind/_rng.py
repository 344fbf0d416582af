"""Labelled random substreams.

Every actor in a run draws from its own generator derived from the root seed
and a tuple of stable labels, so that adding a draw in one place never shifts
the randomness seen anywhere else.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_key(label: str | int) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(label.encode("utf-8"))


def substream(seed: int, *labels: str | int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *labels)``."""
    key = tuple(_label_key(lab) for lab in labels)
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def draw_u64(rng: np.random.Generator, size: int | None = None):
    """Uniform 64-bit unsigned draws (python int when ``size`` is None)."""
    if size is None:
        return int(rng.integers(0, 1 << 64, dtype=np.uint64))
    return rng.integers(0, 1 << 64, size=size, dtype=np.uint64)
