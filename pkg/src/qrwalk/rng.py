"""Reproducible, order-independent random streams.

Every Monte Carlo trial draws from its own counter-based Philox stream.  The
128-bit Philox key is derived from ``(seed, purpose)`` with two rounds of the
splitmix64 finalizer; the trial index occupies the second 64-bit word of the
Philox counter, so trial ``t`` owns counter blocks ``[t * 2**64, (t+1) * 2**64)``.
Draw ``k`` of a trial is therefore a pure function of ``(seed, purpose, trial, k)``
regardless of how trials are batched or scheduled across workers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

PURPOSES = {
    "outcomes": 0x6F75,
    "sde": 0x7364,
    "driver": 0x6472,
    "instances": 0x696E,
}


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_key(seed: int, purpose: str = "outcomes") -> int:
    s = splitmix64(int(seed) & _MASK64)
    tag = splitmix64(s ^ PURPOSES[purpose])
    return (s << 64) | tag


def stream(seed: int, trial: int = 0, purpose: str = "outcomes") -> np.random.Generator:
    if trial < 0:
        raise ValueError("trial index must be non-negative")
    bitgen = np.random.Philox(key=stream_key(seed, purpose), counter=int(trial) << 64)
    return np.random.Generator(bitgen)


def instance_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Stream for building random test instances (unitaries, states, ...)."""
    return stream(seed, index, "instances")
