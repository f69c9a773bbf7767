"""Seeded, counter-based random streams (Philox)."""
from __future__ import annotations

import numpy as np

# stream ids keep independent consumers from sharing draws
INIT, SHUFFLE, DROPOUT, SYNTH, CHECK = range(5)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for ``(seed, stream)``; same pair and call sequence give the same draws."""
    seq = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))
