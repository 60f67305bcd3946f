"""Named, seeded random substreams.

Every stochastic draw in a run comes from a stream keyed by (root seed,
purpose, entity id), so adding or reordering one entity never perturbs the
draws of another.  Streams are backed by ``random.Random`` (Mersenne
Twister), whose output is stable across Python versions, which keeps replay
archives portable.
"""

from __future__ import annotations

import hashlib
import math
import random


def _derive_seed(root_seed: int, *key: object) -> int:
    material = repr((root_seed,) + tuple(key)).encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


class RngStream:
    """A single-owner random substream with the draw primitives the sim needs."""

    def __init__(self, root_seed: int, *key: object):
        self.key = tuple(key)
        self._rng = random.Random(_derive_seed(root_seed, *key))

    def uniform(self) -> float:
        """Uniform draw on the open interval (0, 1)."""
        u = self._rng.random()
        while u <= 0.0:  # random() can return exactly 0.0; the sim needs (0,1)
            u = self._rng.random()
        return u

    def uniform_range(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self._rng.random()

    def exponential(self, mean: float) -> float:
        if mean <= 0:
            raise ValueError(f"exponential mean must be > 0, got {mean}")
        return -math.log(self.uniform()) * mean

    def poisson(self, mean: float) -> int:
        """Knuth's product-of-uniforms sampler; exact for the small means used here."""
        if mean <= 0:
            raise ValueError(f"poisson mean must be > 0, got {mean}")
        limit = math.exp(-mean)
        k = 0
        p = 1.0
        while True:
            p *= self._rng.random()
            if p <= limit:
                return k
            k += 1

    def bernoulli(self, p: float) -> bool:
        return self._rng.random() < p

    def choice(self, seq):
        return seq[self._rng.randrange(len(seq))]

    def shuffled(self, seq):
        out = list(seq)
        self._rng.shuffle(out)
        return out

    def randrange(self, n: int) -> int:
        return self._rng.randrange(n)


class RngRegistry:
    """Lazily creates and hands out the named substreams for one run."""

    def __init__(self, root_seed: int):
        self.root_seed = root_seed
        self._streams: dict[tuple, RngStream] = {}

    def stream(self, *key: object) -> RngStream:
        k = tuple(key)
        if k not in self._streams:
            self._streams[k] = RngStream(self.root_seed, *k)
        return self._streams[k]
