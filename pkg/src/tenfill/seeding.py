"""Deterministic random-stream derivation.

All randomness in the package flows from a single non-negative user seed.
Each consumer derives its own independent stream as

    rng = numpy.random.default_rng(numpy.random.SeedSequence([seed, TAG, *extra]))

where ``TAG`` is one of the module-level stream constants below and
``extra`` is an optional tuple of small non-negative integers (for example
a ratio index and a repetition index inside a sweep).  Two calls with the
same ``(seed, TAG, extra)`` yield bitwise-identical draws; distinct tags
yield statistically independent streams.
"""

import numpy as np

FACTOR_STREAM = 1
NOISE_STREAM = 2
MASK_STREAM = 3
INIT_STREAM = 4
CV_STREAM = 5
WAFER_STREAM = 6
SOLVER_STREAM = 7
RESTART_STREAM = 8


def _entropy(seed, tag, extra):
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return [seed, int(tag), *(int(e) for e in extra)]


def substream(seed, tag, *extra):
    """Generator for stream ``tag`` derived from the master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(seed, tag, extra)))


def child_seed(seed, tag, *extra):
    """A derived integer seed, for APIs that take a plain seed."""
    ss = np.random.SeedSequence(_entropy(seed, tag, extra))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
