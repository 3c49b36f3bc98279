"""Deterministic seeded PRNG for reproducible ranking and simulation runs.

SplitMix64 is used everywhere randomness is needed: it is a handful of
integer operations, has no library dependence, and produces identical
streams on every platform, which is what makes golden-file tests and
seeded replays possible.
"""

from __future__ import annotations

import os

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 stream: identical seed + identical call sequence = identical outputs."""

    __slots__ = ("seed", "_state")

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._state = self.seed

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)

    def uniform(self) -> float:
        """Uniform double in [0, 1): top 53 bits of the next 64-bit output."""
        return (self.next_u64() >> 11) * 2.0**-53

    def spawn(self, *keys: int) -> "SplitMix64":
        """Independent child stream keyed by integers (not by draw order)."""
        return SplitMix64(derive_seed(self.seed, *keys))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministically combine a master seed with integer keys.

    Used to give each (worker, user, session, ...) its own independent
    stream so that parallel partitioning cannot change results.
    """
    s = _mix(seed & _MASK64)
    for k in keys:
        s = _mix((s ^ _mix((k + _GOLDEN) & _MASK64)) & _MASK64)
    return s


def entropy_seed() -> int:
    """Fresh 64-bit seed from OS entropy (for runs without an explicit --seed)."""
    return int.from_bytes(os.urandom(8), "little")
