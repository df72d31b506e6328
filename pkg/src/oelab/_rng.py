"""Counter-based deterministic random streams.

Every random quantity in the package is a pure function of (seed, counters),
so Monte Carlo results are bit-for-bit reproducible and independent of
evaluation order or worker count.  The mixer is SplitMix64, which is cheap,
well distributed, and trivially portable.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a 64-bit bijective mixer."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive(seed: int, *counters: int) -> int:
    """Derive a 64-bit value from a seed and a tuple of counters."""
    h = mix64(seed & _MASK)
    for c in counters:
        h = mix64(h ^ ((c * _GOLDEN) & _MASK))
    return h


def randbelow(n: int, seed: int, *counters: int) -> int:
    """Uniform integer in [0, n), derived from (seed, counters).

    Uses rejection over 64-bit words, so the result is exactly uniform even
    for n close to (or far above) 2**64.
    """
    if n <= 0:
        raise ValueError("randbelow needs n >= 1")
    if n == 1:
        return 0
    words = (n.bit_length() + 63) // 64
    span = 1 << (64 * words)
    limit = span - span % n
    attempt = 0
    while True:
        v = 0
        for w in range(words):
            v = (v << 64) | derive(seed, *counters, attempt, w)
        if v < limit:
            return v % n
        attempt += 1


def uniform01(seed: int, *counters: int) -> float:
    """Uniform float in [0, 1) with 53 random bits."""
    return (derive(seed, *counters) >> 11) * (1.0 / (1 << 53))
