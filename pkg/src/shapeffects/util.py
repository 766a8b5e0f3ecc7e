"""Seeding and small shared numeric helpers."""

from __future__ import annotations

import zlib

import numpy as np


def rng_stream(seed, *keys) -> np.random.Generator:
    """Derive an independent, reproducible generator from a master seed and keys.

    Each distinct key tuple (subset mask, replication index, estimator label, ...)
    gets its own stream, so work units can run in any order, or in parallel,
    without changing results. Strings are folded in via CRC32 so the derivation
    is stable across processes and platforms.
    """
    entropy = [_as_entropy(seed)]
    entropy.extend(_as_entropy(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _as_entropy(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"seed keys must be nonnegative, got {key}")
        return int(key)
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"unsupported seed key type: {type(key).__name__}")


def as_rng(seed_or_rng) -> np.random.Generator:
    """Accept either a Generator or anything np.random.default_rng accepts."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def round_half_up(x) -> np.ndarray:
    """Nearest-integer rounding with .5 going up, elementwise."""
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(np.int64)
