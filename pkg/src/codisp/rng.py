"""Seeded random streams.

All randomness goes through :func:`make_rng`, which builds a Philox
(counter-based) generator from ``SeedSequence(seed, spawn_key=stream)``.
`stream` is a tuple of small non-negative integers naming the substream,
e.g. ``(OP_MIXTURE,)`` for a single call or ``(OP_MIXTURE, combo, rep)``
inside an experiment. Distinct streams are statistically independent and
identical streams reproduce bit-for-bit on every platform.
"""

from __future__ import annotations

import numpy as np

# substream tags, one per randomised operation
OP_MIXTURE = 1
OP_CLASSIC = 2
OP_BLOCKS = 3
OP_GAP = 4
OP_THIN = 5
OP_GRF = 6
OP_AR2D = 7


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def as_rng(seed_or_rng, *stream: int) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return make_rng(seed_or_rng, *stream)
