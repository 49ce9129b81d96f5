"""Keyed RNG streams.

Every random draw in the package comes from a generator keyed by an
integer tuple (seed, purpose tag, ids...), so two pieces of work never
share a stream and results do not depend on evaluation order or worker
count.
"""

import numpy as np

# Purpose tags keep unrelated draws decorrelated even under equal seeds.
TAG_SCENARIO = 1
TAG_PLACE = 2
TAG_RANGES = 3
TAG_INIT = 4
TAG_MESSAGE = 5
TAG_BELIEF = 6
TAG_CHROM = 7
TAG_CROSSOVER = 8
TAG_MUTATE = 9
TAG_GA = 10
TAG_EVAL = 11
TAG_TRIAL = 12

_MASK64 = (1 << 64) - 1


def stream(*key: int) -> np.random.Generator:
    """Generator for the stream identified by an integer key tuple."""
    return np.random.default_rng(np.random.SeedSequence([int(k) & _MASK64 for k in key]))


def derive(*key: int) -> int:
    """Collapse a key tuple into a single reusable 64-bit seed."""
    state = np.random.SeedSequence([int(k) & _MASK64 for k in key]).generate_state(1, dtype=np.uint64)
    return int(state[0])
