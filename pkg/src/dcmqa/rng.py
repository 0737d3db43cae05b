"""Deterministic, counter-based random number generation.

Every stochastic operation in the toolkit draws from a RandomSource.  The
backing generator is Philox, a counter-based bit generator, so a given
(seed, call sequence) produces the same values on every platform and
independently of how the caller parallelizes its work.  There is no global
state anywhere.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def mix_seed(seed: int, *indices: int) -> int:
    """Derive a child seed from a parent seed and integer indices.

    Uses the splitmix64 finalizer, one round per index, so derived streams
    for different (frame, distortion, ...) tuples are decorrelated while
    remaining reproducible.
    """
    z = seed & _MASK64
    for idx in indices:
        z = (z + 0x9E3779B97F4A7C15 + (idx & _MASK64)) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z = z ^ (z >> 31)
    return z


class RandomSource:
    """Stateless-by-construction random stream keyed by a 64-bit seed.

    Each draw call claims a fresh Philox counter block, so the values
    returned by the n-th call are a pure function of (seed, n) and never of
    thread scheduling or of how many values earlier calls requested.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _MASK64
        self.counter = int(counter)

    def _next_block(self) -> np.random.Generator:
        # One dedicated 2**64-aligned counter block per call.
        bg = np.random.Philox(key=self.seed, counter=self.counter << 64)
        self.counter += 1
        return np.random.Generator(bg)

    def uniform(self, shape) -> np.ndarray:
        """Uniform float64 samples in [0, 1)."""
        return self._next_block().random(shape)

    def signs(self, shape) -> np.ndarray:
        """Independent fair draws from {-1.0, +1.0}."""
        u = self._next_block().random(shape)
        return np.where(u < 0.5, -1.0, 1.0)

    def spawn(self, *indices: int) -> "RandomSource":
        """Independent child source for a sub-task identified by indices."""
        return RandomSource(mix_seed(self.seed, *indices))
