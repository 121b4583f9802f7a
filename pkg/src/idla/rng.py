"""Seedable, counter-based random streams.

Every stream is a SplitMix64 sequence: the state advances by a fixed odd
increment and each output is a bijective mix of the state, so the ``t``-th
output depends only on ``(key, t)``.  Keys for child streams (one per particle,
one per replica) and for card stacks are derived from a master seed with the
same mixer.  The jitted engines in :mod:`idla._jit` reproduce these functions
bit for bit.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
STREAM_SALT = 0xD1B54A32D192ED03
CARD_SALT = 0x8CB92BA72F3D8DD7


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, index: int) -> int:
    """Key of child stream ``index`` of master ``seed``."""
    return mix64((seed & MASK64) ^ mix64((index * GOLDEN + STREAM_SALT) & MASK64))


def pack_site(x: int, y: int) -> int:
    return ((x & 0xFFFFFFFF) << 32) | (y & 0xFFFFFFFF)


def card_draw(seed: int, x: int, y: int, t: int) -> int:
    """64-bit draw behind the ``t``-th card (0-based) of the stack at ``(x, y)``."""
    site_key = mix64(mix64((seed ^ CARD_SALT) & MASK64) ^ pack_site(x, y))
    return mix64(site_key + (t + 1) * GOLDEN)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


class RandomStream:
    """A reproducible stream of 64-bit draws.

    Parameters
    ----------
    seed : int
        Master seed.
    stream : int
        Index of the child stream of ``seed``; independent streams for
        workers or replicas are obtained by varying it.

    Streams are not thread safe; give each worker its own.
    """

    __slots__ = ("seed", "stream", "state")

    def __init__(self, seed: int, stream: int = 0):
        if not isinstance(seed, (int, np.integer)):
            raise TypeError("seed must be an integer")
        self.seed = int(seed)
        self.stream = int(stream)
        self.state = derive_key(self.seed, self.stream)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream={self.stream}, state={self.state:#x})"

    def spawn(self, index: int) -> "RandomStream":
        """Independent child stream, keyed by this stream's current state."""
        return RandomStream(self.state, index)

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def random(self) -> float:
        """Uniform float on the open interval (0, 1), 53 bits of resolution."""
        return ((self.next_u64() >> 11) + 0.5) * 2.0**-53

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``, exact (Lemire's rejection method)."""
        if n <= 0:
            raise ValueError("n must be positive")
        m = self.next_u64() * n
        low = m & MASK64
        if low < n:
            threshold = (-n) % n
            while low < threshold:
                m = self.next_u64() * n
                low = m & MASK64
        return m >> 64

    def u64_array(self, size: int) -> np.ndarray:
        """The next ``size`` draws as a uint64 array (advances the stream)."""
        steps = np.arange(1, size + 1, dtype=np.uint64) * np.uint64(GOLDEN)
        out = _mix64_array(np.uint64(self.state) + steps)
        self.state = (self.state + size * GOLDEN) & MASK64
        return out

    def uniforms(self, size: int) -> np.ndarray:
        """``size`` floats on (0, 1), identical to repeated :meth:`random`."""
        u = self.u64_array(size)
        return ((u >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def as_stream(rng) -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    return RandomStream(rng)
