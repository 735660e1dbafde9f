"""Reproducible Wiener increments from a counter-based generator.

Each trajectory owns one Philox4x64-10 stream (numpy's implementation of
the Salmon et al. counter-based generator).  Its 128-bit key is
``(splitmix64(seed ^ golden * (index + 1)), splitmix64(seed) )``, so
stream ``index`` of master seed ``seed`` is fixed no matter how the
trajectories are scheduled.  Raw 64-bit words are turned into increments
here rather than through ``numpy.random.Generator`` so the mapping does
not depend on numpy's sampler versions.

Two increment laws are offered:

``"gaussian"``
    ``dW = sqrt(dt) * z`` with ``z`` standard normal from the Box-Muller
    transform of two 53-bit uniforms.
``"two_point"``
    ``dW = +/- sqrt(dt)`` with equal probability (sign from the top bit).
    The first two moments match the Gaussian law, and ``dW**2 == dt``
    exactly, which makes Euler steps reproduce the Ito rule ``dW^2 = dt``
    step by step.
"""

from __future__ import annotations

import numpy as np

__all__ = ["INCREMENT_KINDS", "splitmix64", "stream_key", "NoiseStream", "increments"]

INCREMENT_KINDS = ("two_point", "gaussian")

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x):
    """One round of the SplitMix64 finaliser on a Python int."""
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_key(seed, index):
    seed = int(seed) & _MASK
    lo = splitmix64(seed ^ ((_GOLDEN * (int(index) + 1)) & _MASK))
    hi = splitmix64(seed)
    return lo | (hi << 64)


class NoiseStream:
    """Sequential source of Wiener increments for one trajectory."""

    def __init__(self, seed=0, index=0):
        self.seed = int(seed)
        self.index = int(index)
        self._bitgen = np.random.Philox(key=stream_key(seed, index))

    def raw(self, n):
        return self._bitgen.random_raw(n)

    def increments(self, n, dt, kind="two_point"):
        if kind == "two_point":
            bits = self.raw(n) >> np.uint64(63)
            signs = 1.0 - 2.0 * bits.astype(float)
            return signs * np.sqrt(dt)
        if kind == "gaussian":
            pairs = (n + 1) // 2
            words = self.raw(2 * pairs)
            # 53-bit uniforms; u1 in (0, 1] keeps the log finite
            u = (words >> np.uint64(11)).astype(float) * 2.0**-53
            u1 = 1.0 - u[0::2]
            u2 = u[1::2]
            rad = np.sqrt(-2.0 * np.log(u1))
            ang = 2.0 * np.pi * u2
            z = np.empty(2 * pairs)
            z[0::2] = rad * np.cos(ang)
            z[1::2] = rad * np.sin(ang)
            return z[:n] * np.sqrt(dt)
        raise ValueError(f"unknown increment kind {kind!r}; choose from {INCREMENT_KINDS}")


def increments(seed, index, n, dt, kind="two_point"):
    """All ``n`` increments of trajectory ``index`` under master ``seed``."""
    return NoiseStream(seed, index).increments(n, dt, kind)
