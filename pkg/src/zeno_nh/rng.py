"""Seedable, splittable trajectory RNG: xoshiro256++ 1.0 over splitmix64.

Pinned algorithm versions (Blackman & Vigna reference implementations):
splitmix64 expands a 64-bit seed into the four xoshiro256++ state words;
per-trajectory streams use stream_seed(base_seed, i) = splitmix64 applied
to base_seed XOR i.  Uniform doubles are (x >> 11) * 2^-53.

The same integer recurrences run inside the numba kernels, so trajectories
are bit-identical across backends and platforms.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def splitmix64(x: int) -> int:
    """One splitmix64 output for state x (also advances-by-constant form)."""
    z = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def stream_seed(base_seed: int, index: int) -> int:
    """Derived 64-bit seed for trajectory `index`: splitmix64(base ^ index)."""
    return splitmix64((base_seed ^ index) & 0xFFFFFFFFFFFFFFFF)


def xoshiro_state(seed: int) -> np.ndarray:
    """Four state words from successive splitmix64 outputs of `seed`."""
    s = np.empty(4, dtype=np.uint64)
    x = seed & 0xFFFFFFFFFFFFFFFF
    for i in range(4):
        x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        s[i] = np.uint64(z ^ (z >> 31))
    return s


def _rotl(x: np.uint64, k: int) -> np.uint64:
    k = np.uint64(k)
    return ((x << k) | (x >> (np.uint64(64) - k))) & _MASK


def xoshiro_next(state: np.ndarray) -> int:
    """Advance xoshiro256++ state in place; return the 64-bit output."""
    with np.errstate(over="ignore"):
        result = (_rotl((state[0] + state[3]) & _MASK, 23) + state[0]) & _MASK
        t = (state[1] << np.uint64(17)) & _MASK
        state[2] ^= state[0]
        state[3] ^= state[1]
        state[1] ^= state[2]
        state[0] ^= state[3]
        state[2] ^= t
        state[3] = _rotl(state[3], 45)
    return int(result)


def uniform(state: np.ndarray) -> float:
    """Uniform double in [0, 1) from the top 53 bits."""
    return (xoshiro_next(state) >> 11) * (2.0**-53)


class TrajectoryRng:
    """Convenience wrapper over one xoshiro256++ stream."""

    def __init__(self, seed: int):
        self.state = xoshiro_state(seed)

    def uniform(self) -> float:
        return uniform(self.state)

    def exponential(self, rate: float) -> float:
        u = self.uniform()
        return -np.log1p(-u) / rate


RNG_IDENTIFIER = "xoshiro256++ 1.0 / splitmix64 seeding"
