"""Counter-based splittable random streams.

Every stochastic routine derives its generators from a user seed plus a
structured stream path: a purpose tag followed by integer coordinates such
as a particle index or a (time node, i, j) stratum. Streams are mutually
independent, and extending a run (more particles, more strata) never
reshuffles draws already assigned to existing coordinates.
"""

import numpy as np

# Purpose tags; first element of every stream path.
SAMPLE = 0
EM_FIT = 1
MARKOV_SIM = 2
LABELED_SIM = 3
KINETIC = 4
SHAPES = 5


def stream(seed: int, *path: int) -> np.random.Generator:
    """Independent Philox generator for the stream at `path` under `seed`."""
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))
