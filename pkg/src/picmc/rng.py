"""Counter-based random streams for reproducible parallel runs.

Every consumer of randomness in the engine owns a *stream key* derived from
the master seed and a structural path (purpose tag, species, cell, step, ...).
A draw is a pure function of (key, counter), so any cell can be processed by
any worker, in any order, and produce the same numbers. This is what makes
collision results independent of the domain decomposition.

The mixer is the splitmix64 finalizer. It is plain 64-bit integer arithmetic,
implemented twice with identical results: a scalar path (Python ints, used by
rare per-event code) and a vectorized path (uint64 ndarrays, used to fill
whole selection/initialization batches at once).
"""

import numpy as np

__all__ = [
    "GOLDEN",
    "STREAM_BENCH",
    "STREAM_COLLIDE",
    "STREAM_INIT",
    "derive",
    "derive_vec",
    "mix64",
    "mix64_vec",
    "stream",
    "uniform",
    "uniform_open",
    "uniforms",
    "uniforms_open",
]

# Registry of top-level stream purposes. Every stream path must start with one
# of these so independent subsystems can never alias each other's draws.
STREAM_INIT = 1
STREAM_COLLIDE = 2
STREAM_BENCH = 3

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB

# 2^-53: maps the top 53 bits of a draw onto [0, 1).
_INV53 = 2.0**-53

_U_GOLDEN = np.uint64(GOLDEN)
_U_MULT1 = np.uint64(_MULT1)
_U_MULT2 = np.uint64(_MULT2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer (scalar path)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MULT1) & _MASK
    z = ((z ^ (z >> 27)) * _MULT2) & _MASK
    return z ^ (z >> 31)


def mix64_vec(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on a uint64 array; bitwise equal to mix64."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U30)) * _U_MULT1
        z = (z ^ (z >> _U27)) * _U_MULT2
        return z ^ (z >> _U31)


def derive(key: int, n: int) -> int:
    """Child key / raw draw number n of a stream.

    The +1 keeps derive(key, 0) distinct from the key itself.
    """
    return mix64((key + (n + 1) * GOLDEN) & _MASK)


def derive_vec(key, n) -> np.ndarray:
    """Vectorized derive; key and n broadcast as uint64 arrays."""
    key = np.asarray(key, dtype=np.uint64)
    n = np.asarray(n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_vec(key + (n + np.uint64(1)) * _U_GOLDEN)


def stream(seed: int, *path: int) -> int:
    """Stream key for a structural path, e.g. stream(seed, TAG, isp, cell)."""
    key = mix64(seed & _MASK)
    for p in path:
        key = derive(key, p)
    return key


def uniform(key: int, counter: int) -> float:
    """Draw number `counter` of the stream, uniform in [0, 1)."""
    return (derive(key, counter) >> 11) * _INV53


def uniform_open(key: int, counter: int) -> float:
    """Uniform in the open interval (0, 1); safe under log()."""
    return ((derive(key, counter) >> 11) + 0.5) * _INV53


def uniforms(key, counters) -> np.ndarray:
    """Vectorized uniform draws in [0, 1); bitwise equal to uniform()."""
    bits = derive_vec(key, counters) >> _U11
    return bits.astype(np.float64) * _INV53


def uniforms_open(key, counters) -> np.ndarray:
    """Vectorized uniform draws in (0, 1); bitwise equal to uniform_open()."""
    bits = derive_vec(key, counters) >> _U11
    return (bits.astype(np.float64) + 0.5) * _INV53
