"""Seed derivation shared by every stochastic component.

Streams are keyed by integer tuples so that a member's randomness depends only
on ``(seed, round, member, purpose)`` and never on execution order.
"""

from __future__ import annotations

import zlib

import numpy as np

# Purpose tags; arbitrary but frozen, changing them changes every run.
COLLECT = 1
TRAIN = 2
EVAL = 3
AGGREGATE = 4
SETUP = 5


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    if part < 0:
        raise ValueError(f"seed components must be non-negative, got {part}")
    return int(part)


def derive_rng(*parts: int | str) -> np.random.Generator:
    """Independent generator for the stream identified by ``parts``."""
    return np.random.default_rng(np.random.SeedSequence([_key(p) for p in parts]))
