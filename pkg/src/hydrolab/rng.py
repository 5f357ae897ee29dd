"""Deterministic replica streams: splitmix64 seeding, xoshiro256++ core.

A replica stream is identified by (root_seed, stream_id). The stream state
is seeded by one splitmix64 avalanche of

    x0 = root_seed XOR (stream_id + 1) * 0x9E3779B97F4A7C15

iterated four times to fill the xoshiro256++ state. Identical
(root_seed, stream_id) yields identical draws regardless of how replicas
are scheduled across workers. Uniform doubles are taken from the top 53
bits shifted into the open unit interval:

    u = ((x >> 11) + 0.5) * 2^-53   in (0, 1)

so that -log(u) is always finite and positive.

The fast path lives in ``_kernels`` (numba); ``XoshiroRef`` below is an
integer-arithmetic reference used to cross-check the compiled stream.
"""
from __future__ import annotations

import numpy as np

from . import _kernels as _k

GOLDEN = 0x9E3779B97F4A7C15
_M64 = (1 << 64) - 1


def _splitmix64(state: int):
    state = (state + GOLDEN) & _M64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    z ^= z >> 31
    return state, z


def seed_state(root_seed: int, stream_id: int) -> np.ndarray:
    """xoshiro256++ state (uint64[4]) for a replica stream."""
    x = (int(root_seed) ^ (((int(stream_id) + 1) * GOLDEN) & _M64)) & _M64
    s = np.zeros(4, dtype=np.uint64)
    for i in range(4):
        x, z = _splitmix64(x)
        s[i] = z
    if not s.any():
        s[0] = GOLDEN
    return s


class RngStream:
    """Replica-indexed deterministic stream backed by the compiled core."""

    def __init__(self, root_seed: int, stream_id: int = 0):
        self.root_seed = int(root_seed)
        self.stream_id = int(stream_id)
        self.state = seed_state(root_seed, stream_id)

    def next_u64(self) -> int:
        return int(_k.xo_next_py(self.state))

    def unit_open(self) -> float:
        return float(_k.unit_open_py(self.state))

    def unit_open_array(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        _k.fill_unit_open(self.state, out)
        return out

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.root_seed, stream_id)


class XoshiroRef:
    """Pure Python xoshiro256++ with the identical seeding; test oracle."""

    def __init__(self, root_seed: int, stream_id: int = 0):
        x = (int(root_seed) ^ (((int(stream_id) + 1) * GOLDEN) & _M64)) & _M64
        s = []
        for _ in range(4):
            x, z = _splitmix64(x)
            s.append(z)
        if not any(s):
            s[0] = GOLDEN
        self.s = s

    @staticmethod
    def _rotl(x: int, k: int) -> int:
        return ((x << k) | (x >> (64 - k))) & _M64

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (self._rotl((s0 + s3) & _M64, 23) + s0) & _M64
        t = (s1 << 17) & _M64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = self._rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def unit_open(self) -> float:
        return ((self.next_u64() >> 11) + 0.5) * 2.0**-53
