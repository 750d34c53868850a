"""Deterministic pseudo-random numbers (xoshiro256++ seeded via splitmix64).

All randomness in the package flows through :class:`Rng`, so a fixed
64-bit seed reproduces every draw bit-exactly on any platform.  Child
streams derived with :meth:`Rng.fork` depend only on the parent seed and
the tag, never on how much of the parent stream was consumed.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractViolation

_MASK64 = (1 << 64) - 1
_INV_2_53 = 2.0 ** -53


def _splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (output, next_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64, state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def _fnv1a(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


class Rng:
    """xoshiro256++ generator with a 64-bit seed."""

    __slots__ = ("seed", "_s")

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        state = self.seed
        s = []
        for _ in range(4):
            word, state = _splitmix64(state)
            s.append(word)
        self._s = s

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[0] + s[3]) & _MASK64, 23) + s[0]) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float64 in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        # Box-Muller; 1-random() keeps the log argument in (0, 1].
        u1 = 1.0 - self.random()
        u2 = self.random()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, shape: tuple[int, ...] | int, sigma: float = 1.0) -> np.ndarray:
        if isinstance(shape, int):
            shape = (shape,)
        n = 1
        for d in shape:
            n *= int(d)
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            out[i] = self.normal(0.0, sigma)
        return out.reshape(shape)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n); unbiased via top-bit rejection."""
        if n <= 0:
            raise ContractViolation(f"randrange needs n >= 1, got {n}")
        bits = max(1, (n - 1).bit_length())
        while True:
            r = self.next_u64() >> (64 - bits)
            if r < n:
                return r

    def choice(self, seq):
        if len(seq) == 0:
            raise ContractViolation("choice on an empty sequence")
        return seq[self.randrange(len(seq))]

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randrange(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def sample(self, n: int, k: int) -> list[int]:
        """k distinct indices drawn from range(n), in draw order."""
        if not 0 <= k <= n:
            raise ContractViolation(f"sample needs 0 <= k <= n, got k={k} n={n}")
        idx = list(range(n))
        self.shuffle(idx)
        return idx[:k]

    def fork(self, tag: str | int) -> "Rng":
        """Independent child stream determined by (seed, tag) only."""
        h = _fnv1a(str(tag).encode("utf-8"))
        mixed, _ = _splitmix64(self.seed ^ _rotl(h, 1))
        return Rng(mixed)
