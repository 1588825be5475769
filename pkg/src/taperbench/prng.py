"""Deterministic pseudorandom streams for experiment inputs.

Xoshiro256** (Blackman/Vigna) with SplitMix64 state expansion. Each matrix
gets its own stream derived from the run seed xored with an FNV-1a hash of
the matrix name, so adding or removing matrices never shifts the samples
drawn for the others.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes | str) -> int:
    """64-bit FNV-1a hash."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class SplitMix64:
    """State expander; also usable as a standalone generator."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


class Xoshiro256StarStar:
    def __init__(self, seed: int):
        sm = SplitMix64(seed)
        self.s = [sm.next_u64() for _ in range(4)]
        if not any(self.s):  # all-zero state is invalid
            self.s[0] = 1

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def next_double(self) -> float:
        """Uniform on [0, 1), 53 significant bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def next_signed_unit(self) -> float:
        """Uniform on [-1, 1)."""
        return 2.0 * self.next_double() - 1.0


def stream_for(seed: int, name: str) -> Xoshiro256StarStar:
    """Per-matrix generator: run seed xored with the name hash."""
    return Xoshiro256StarStar((seed ^ fnv1a64(name)) & MASK64)
