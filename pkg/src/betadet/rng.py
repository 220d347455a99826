"""Deterministic pseudorandom stream: SplitMix64-seeded xoshiro256++.

Every stochastic choice in this package (sampling, scene generation,
weight init, batch shuffling) goes through this generator so that runs
are bit-identical across platforms and reimplementable in any language.
The exact algorithm, so another implementation can match it:

SplitMix64 (seed expansion), state ``s`` a 64-bit integer::

    s  = (s + 0x9E3779B97F4A7C15) mod 2^64
    z  = s
    z  = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z  = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output z ^ (z >> 31)

xoshiro256++ (main stream), state four 64-bit words ``s0..s3`` produced
by four consecutive SplitMix64 outputs::

    result = rotl64(s0 + s3, 23) + s0      (the 64-bit output)
    t  = (s1 << 17) mod 2^64
    s2 ^= s0;  s3 ^= s1;  s1 ^= s2;  s0 ^= s3
    s2 ^= t;   s3 = rotl64(s3, 45)

A uniform double in [0, 1) is ``(result >> 11) * 2^-53``.

Substreams: ``substream(seed, key)`` seeds SplitMix64 with
``(seed + (key + 1) * 0x9E3779B97F4A7C15) mod 2^64`` so that stream
``key`` is reproducible without generating streams ``0..key-1``.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)


def _splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (new_state, output)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256(object):
    """xoshiro256++ stream; the instance is the explicit RNG state."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed: int):
        state = seed & _MASK64
        state, self.s0 = _splitmix64(state)
        state, self.s1 = _splitmix64(state)
        state, self.s2 = _splitmix64(state)
        state, self.s3 = _splitmix64(state)

    def next_u64(self) -> int:
        """Next raw 64-bit output."""
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s0 + s3) & _MASK64, 23) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, _rotl(s3, 45)
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform_open(self) -> float:
        """Uniform double in the open interval (0, 1); redraws on 0."""
        u = self.uniform()
        while u == 0.0:
            u = self.uniform()
        return u

    def uniform_in(self, lo: float, hi: float) -> float:
        """Uniform double in [lo, hi)."""
        return lo + (hi - lo) * self.uniform()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in {lo, ..., hi} via rejection-free scaling."""
        span = hi - lo + 1
        return lo + int(self.uniform() * span)

    def uniforms(self, n: int) -> list[float]:
        """n consecutive uniform doubles in [0, 1)."""
        return [self.uniform() for _ in range(n)]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]

    def state(self) -> tuple[int, int, int, int]:
        return (self.s0, self.s1, self.s2, self.s3)


def substream(seed: int, key: int) -> Xoshiro256:
    """Independent stream `key` of the generator family rooted at `seed`."""
    return Xoshiro256((seed + (key + 1) * _GOLDEN) & _MASK64)
