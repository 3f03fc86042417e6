"""Splittable, counter-based random streams.

A stream is identified by ``(seed, run_index, tag)``.  The key material is
produced by ``numpy.random.SeedSequence(entropy=seed,
spawn_key=(run_index, crc32(tag)))`` and drives a ``Philox4x64-10`` bit
generator.  Both algorithms are fully specified, so any implementation that
reproduces SeedSequence and Philox reproduces every draw in this package.
"""

from __future__ import annotations

import zlib

import numpy as np

GENERATOR_NAME = "Philox4x64-10 keyed by SeedSequence(seed, spawn_key=(run_index, crc32(tag)))"


def tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8")) & 0xFFFFFFFF


def stream(seed: int, tag: str, run_index: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, run, purpose) triple."""
    if seed < 0 or run_index < 0:
        raise ValueError("seed and run_index must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(run_index), tag_id(tag)))
    return np.random.Generator(np.random.Philox(ss))
