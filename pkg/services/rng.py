"""
Counter-based, splittable random streams.

Every stream is a Philox generator keyed by (base_seed, *keys) through a
SeedSequence spawn key, so stream r never depends on how many other streams
were consumed or in which order.
"""
from typing import Tuple

import numpy as np
from scipy import special

_UINT64 = 2 ** 64
_UNIT = 2.0 ** -53


def _spawn_key(keys: Tuple[int, ...]) -> Tuple[int, ...]:
    return tuple(int(k) % _UINT64 for k in keys)


def substream(base_seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the substream (base_seed, *keys)."""
    seq = np.random.SeedSequence(entropy=int(base_seed) % _UINT64, spawn_key=_spawn_key(keys))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(base_seed: int, *keys: int) -> int:
    """64-bit seed for a nested experiment (e.g. the bootstraps of one run)."""
    seq = np.random.SeedSequence(entropy=int(base_seed) % _UINT64, spawn_key=_spawn_key(keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on the open interval (0, 1) with 53-bit resolution."""
    bits = rng.integers(0, 2 ** 53, size=size, dtype=np.int64)
    return (bits + 0.5) * _UNIT


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws by inverse-CDF transform of open uniforms."""
    return special.ndtri(open_uniform(rng, size))


def uniform_indices(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    """``size`` indices drawn uniformly with replacement from range(n)."""
    return rng.integers(0, n, size=size, dtype=np.intp)
