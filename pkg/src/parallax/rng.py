"""Portable 64-bit PRNG used everywhere randomness must be reproducible
across implementations (mask generation, phantoms, dithering, weight init).

The generator is splitmix64. State is a single uint64 and the update is

    state = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state
    z = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9   mod 2^64
    z = (z XOR (z >> 27)) * 0x94D049BB133111EB   mod 2^64
    output = z XOR (z >> 31)

Uniform doubles take the top 53 bits: u = (output >> 11) * 2^-53, so u is in
[0, 1). Gaussians come from the Box-Muller transform on consecutive uniform
pairs with the first uniform shifted into (0, 1]. Any implementation of these
equations reproduces the exact bit streams, so masks and phantoms are
portable artifacts rather than library-version accidents.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def mix64(*parts: int) -> int:
    """Hash a tuple of integers into a single 64-bit seed.

    Used to derive per-coil / per-row / per-epoch substream seeds from a base
    seed: mix64(seed, i) folds each part through one splitmix64 step.
    """
    acc = 0
    for p in parts:
        acc = _mix((acc + (int(p) & _MASK64) + _GOLDEN) & _MASK64)
    return acc


class SplitMix64:
    """splitmix64 stream; see module docstring for the update equations."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _mix(self.state)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection-free modulo (n << 2^64)."""
        return self.next_u64() % n

    def gauss_pair(self) -> tuple[float, float]:
        """Two independent standard normals via Box-Muller."""
        # shift u1 into (0, 1] so log() is finite
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = (self.next_u64() >> 11) * 2.0**-53
        r = math.sqrt(-2.0 * math.log(u1))
        t = 2.0 * math.pi * u2
        return r * math.cos(t), r * math.sin(t)

    def gauss(self, n: int) -> list[float]:
        out: list[float] = []
        while len(out) < n:
            a, b = self.gauss_pair()
            out.append(a)
            out.append(b)
        return out[:n]


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def uniform_array(seed: int, n: int) -> np.ndarray:
    """Vectorized splitmix64 uniforms; element i equals the (i+1)-th
    sequential draw of ``SplitMix64(seed)`` because the state recurrence is
    closed-form in the step index: state_i = seed + (i+1) * golden."""
    idx = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = np.uint64(seed & _MASK64) + idx * np.uint64(_GOLDEN)
        bits = _mix_array(state)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


def gauss_array(seed: int, n: int) -> np.ndarray:
    """Vectorized Box-Muller normals matching ``SplitMix64(seed).gauss(n)``."""
    n_pairs = (n + 1) // 2
    u = uniform_array(seed, 2 * n_pairs)
    u1 = u[0::2] + 2.0**-53  # shift into (0, 1], as in gauss_pair
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    t = 2.0 * np.pi * u2
    out = np.empty(2 * n_pairs)
    out[0::2] = r * np.cos(t)
    out[1::2] = r * np.sin(t)
    return out[:n]
