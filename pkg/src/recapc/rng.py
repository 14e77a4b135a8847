"""Counter-based random numbers.

Every draw is a pure function of ``(seed, stream index, draw index)``: the
three are combined and passed through the SplitMix64 finalizer, and the top
53 bits become a double in [0, 1). Streams can be evaluated in any order or
in vectorized batches and still give identical numbers, which is what the
session simulator and the seeded generators rely on. Normals use the
Box-Muller cosine branch, one normal per pair of uniforms, so the sequence
is easy to reproduce in other languages.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, index=0) -> np.ndarray:
    """64-bit key of stream ``index`` under ``seed`` (``index`` may be an array)."""
    base = _mix(np.array([seed & _MASK], dtype=np.uint64))
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(base ^ _mix(idx + _GOLDEN))


def derive_seed(seed: int, index: int) -> int:
    """Child seed for item ``index`` of a seeded batch."""
    return int(stream_key(seed, index)[0])


def uniforms(key: np.ndarray, draw) -> np.ndarray:
    """Uniform [0, 1) numbers for ``key`` at counter ``draw`` (broadcasting)."""
    with np.errstate(over="ignore"):
        z = _mix(np.asarray(key, dtype=np.uint64) + (np.asarray(draw, dtype=np.uint64) + np.uint64(1)) * _GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


class CounterRNG:
    """Sequential view of a single stream."""

    def __init__(self, seed: int, index: int = 0):
        self.key = stream_key(seed, index)[0]
        self.counter = 0

    def uniform(self, size: int) -> np.ndarray:
        out = uniforms(self.key, np.arange(self.counter, self.counter + size))
        self.counter += size
        return out

    def normal(self, size, loc: float = 0.0, scale: float = 1.0) -> np.ndarray:
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape))
        u = self.uniform(2 * n)
        radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        z = radius * np.cos(2.0 * np.pi * u[1::2])
        return (loc + scale * z).reshape(shape)
