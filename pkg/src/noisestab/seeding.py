"""Deterministic RNG derivation for sharded, reproducible estimators.

Every estimator in this package derives its generators through
:func:`derive_rng` so that a (seed, purpose, shard) triple always maps to
the same stream, independent of how work is scheduled.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_parts(parts: tuple) -> tuple[int, ...]:
    out = []
    for p in parts:
        if isinstance(p, str):
            out.append(zlib.crc32(p.encode("utf-8")))
        else:
            out.append(int(p))
    return tuple(out)


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def derive_rng(seed: int, *key) -> np.random.Generator:
    """Generator for the sub-stream identified by ``key`` under ``seed``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=_key_parts(key))
    return np.random.Generator(np.random.PCG64(ss))
