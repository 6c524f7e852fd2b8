"""Counter-based random numbers.

Walk randomness is a pure function of (seed, start node, walk index, step,
attempt), so walks can be generated in any order or in parallel and still
come out identical.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / (1 << 53)

# odd constants separating the lanes mixed into a key
_STEP = np.uint64(0xD6E8FEB86659FD93)
_ATTEMPT = np.uint64(0xA0761D6478BD642F)
_LANE = np.uint64(0xE7037ED1A0B428DB)


def splitmix64(x):
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def walk_keys(seed: int, nodes, walk_index: int | np.ndarray):
    """Per-walk 64-bit keys derived from (seed, node, walk index)."""
    nodes = np.asarray(nodes, dtype=np.uint64)
    widx = np.asarray(walk_index, dtype=np.uint64)
    base = splitmix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
    with np.errstate(over="ignore"):
        k = splitmix64(base ^ splitmix64(nodes))
        return splitmix64(k ^ splitmix64(widx * _STEP + np.uint64(1)))


def uniforms(keys, step: int, attempt=0, lane: int = 0):
    """Uniform floats in [0, 1), one per key, for the given counters."""
    attempt = np.asarray(attempt, dtype=np.uint64)
    with np.errstate(over="ignore"):
        c = (np.uint64(step) * _STEP) ^ (attempt * _ATTEMPT) ^ (np.uint64(lane + 1) * _LANE)
        z = splitmix64(np.asarray(keys, dtype=np.uint64) ^ c)
    return (z >> _S11).astype(np.float64) * _INV53


def derive_seed(seed: int, *salt: int) -> int:
    """Deterministic child seed, e.g. for repetition ``r`` of an experiment."""
    x = np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    for s in salt:
        with np.errstate(over="ignore"):
            x = splitmix64(x ^ splitmix64(np.array([s], dtype=np.uint64)))
    return int(x[0] >> np.uint64(1))
