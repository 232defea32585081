"""Counter-based random number streams.

Streams are Philox generators keyed by (master seed, stream indices); the
key derivation is a fixed odd-multiplier mix, so any (chain, step, tag)
triple yields the same stream on every run and across workers.  Chains
never share a stream; per-step substreams make pseudo-marginal inner
estimates reproducible regardless of execution order.
"""

from __future__ import annotations

import numpy as np

_MIX = 0x9E3779B97F4A7C15  # golden-ratio odd multiplier
_MASK = (1 << 64) - 1

_TAGS = {"": 0, "tune": 1, "proposal": 2, "weight": 3, "init": 4, "accept": 5}


def _mix(*values: int) -> int:
    h = 0x243F6A8885A308D3
    for v in values:
        h ^= (v & _MASK)
        h = (h * _MIX) & _MASK
        h ^= h >> 29
    return h


def stream(master_seed: int, *indices: int, tag: str = "") -> np.random.Generator:
    """Philox generator for the given (seed, indices, tag) address."""
    key = _mix(master_seed, _TAGS.get(tag, _mix(*map(ord, tag))), *indices)
    return np.random.Generator(np.random.Philox(key=key))


def spawn_seed(master_seed: int, *indices: int) -> int:
    """Derived 63-bit seed for nested components that take plain seeds."""
    return _mix(master_seed, *indices) >> 1
