"""Counter-based random numbers.

Uniforms come from SplitMix64 indexed by ``(seed, counter)``: draw ``i`` is
``mix(seed + (counter + i + 1) * GOLDEN)``, so any slice of the stream can be
regenerated without replaying the prefix. Normals use Box-Muller on
consecutive uniform pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, counter: int, n: int) -> np.ndarray:
    """Raw 64-bit outputs ``counter .. counter + n - 1`` of the stream for ``seed``."""
    idx = (np.arange(n, dtype=np.uint64) + np.uint64((counter + 1) & _MASK64))
    with np.errstate(over="ignore"):
        state = np.uint64(seed & _MASK64) + idx * _GOLDEN
        return _mix(state)


@dataclass
class RngState:
    seed: int
    counter: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.counter <= _MASK64):
            raise ValueError("seed and counter must be unsigned 64-bit integers")

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in [0, 1) with 53 random bits each."""
        bits = splitmix64(self.seed, self.counter, n)
        self.counter += n
        return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, shape) -> np.ndarray:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64))
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1 - u in (0, 1]
        angle = 2.0 * np.pi * u[:, 1]
        z = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
        return z.reshape(-1)[:n].reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")

    def spawn(self, stream: int) -> "RngState":
        """Independent child generator keyed off this seed and ``stream``."""
        child_seed = int(splitmix64(self.seed ^ 0x5851F42D4C957F2D, stream, 1)[0])
        return RngState(child_seed)
