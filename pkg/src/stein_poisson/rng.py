"""Counter-based random streams keyed by (seed, stream, replication)."""
from __future__ import annotations

import numpy as np

# Stream tags keep independent consumers of the same seed apart.
POINTS = 0
Z_SAMPLES = 1
QUADRATURE = 2
NORMAL_DRAWS = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return a Philox generator for ``seed`` and an integer key path.

    The generator depends only on its arguments, so replications can be
    evaluated in any order or on any thread and still give identical draws.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
