"""Deterministic random initial data.

The generator is a fixed counter-based 64-bit mixer (SplitMix64) so that any
implementation following the recipe below reproduces the exact integer
stream:

    state_i = (seed + (i + 1) * 0x9E3779B97F4A7C15) mod 2^64      i = 0, 1, ...
    z = state_i
    z = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9   (mod 2^64)
    z = (z XOR (z >> 27)) * 0x94D049BB133111EB   (mod 2^64)
    z = z XOR (z >> 31)

and the float mapping is ``x_i = z_i / 2^63 - 1`` (IEEE double arithmetic),
uniform on [-1, 1). Samples fill the grid row-major (dimension 0 outermost).
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = 0xFFFFFFFFFFFFFFFF


def splitmix64(seed, count):
    """The raw 64-bit integer stream for a seed."""
    seed = np.uint64(int(seed) & _MASK)
    i = np.arange(1, count + 1, dtype=np.uint64)
    z = seed + i * _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniform_symmetric(seed, count):
    """Uniform [-1, 1) doubles from the fixed integer stream."""
    return splitmix64(seed, count).astype(np.float64) / 2.0 ** 63 - 1.0


def seeded_random_field(grid, seed, offset=0.0, amplitude=1.0):
    """``offset + amplitude * xi`` with xi i.i.d. uniform on [-1, 1)."""
    xi = uniform_symmetric(seed, grid.size).reshape(grid.shape)
    return offset + amplitude * xi
