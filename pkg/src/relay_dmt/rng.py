"""Counter-based random streams.

Every chunk of Monte Carlo trials gets its own Philox stream keyed by the
experiment seed, with the chunk index in the high counter word. Streams are
disjoint and independent of how chunks are spread over workers.
"""

import os

import numpy as np

__all__ = ["stream", "resolve_seed", "DEFAULT_SEED", "SEED_ENV"]

DEFAULT_SEED = 20240601
SEED_ENV = "RELAY_DMT_SEED"
_MASK64 = (1 << 64) - 1


def stream(seed: int, index: int = 0, purpose: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, index)``.

    ``purpose`` separates families of streams (channels, unitaries, ...)
    drawn under the same seed.
    """
    key = np.array([seed & _MASK64, purpose & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, 0, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def resolve_seed(seed=None) -> int:
    """Explicit seed, else ``$RELAY_DMT_SEED``, else the package default."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    if env:
        return int(env, 0)
    return DEFAULT_SEED
