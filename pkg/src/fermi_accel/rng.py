"""Counter-based random streams.

Every variate is a pure function of ``(seed, particle index, attempt,
slot)``, so results never depend on how particles are split among workers.
"""
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0 ** -53


def _mix(x):
    x = x ^ (x >> np.uint64(30))
    x = x * _M1
    x = x ^ (x >> np.uint64(27))
    x = x * _M2
    return x ^ (x >> np.uint64(31))


def hash64(seed, index, attempt=0, slot=0):
    """SplitMix64-style hash of the counter tuple (vectorized over ``index``)."""
    with np.errstate(over="ignore"):
        seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        idx = np.asarray(index, dtype=np.uint64)
        x = _mix(seed + _GOLDEN)
        x = _mix(x ^ (idx * _GOLDEN + np.uint64(1)))
        x = _mix(x ^ np.uint64((int(attempt) << 8) | int(slot)))
    return x


def uniform(seed, index, attempt=0, slot=0):
    """Uniform variates in the half-open interval (0, 1]."""
    bits = hash64(seed, index, attempt, slot) >> np.uint64(11)
    return (bits.astype(np.float64) + 1.0) * _TWO_M53


def normal_pair(seed, index, attempt=0):
    """Two independent standard normals per index via Box-Muller."""
    u1 = uniform(seed, index, attempt, 0)
    u2 = uniform(seed, index, attempt, 1)
    r = np.sqrt(-2.0 * np.log(u1))
    phi = 2.0 * np.pi * u2
    return r * np.cos(phi), r * np.sin(phi)
