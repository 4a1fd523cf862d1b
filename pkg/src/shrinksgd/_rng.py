"""Seeded random streams.

Every source of randomness in the package is a :class:`numpy.random.Generator`
handed in by the caller. Sub-streams are derived through ``SeedSequence``
spawn keys so that independent pieces of an experiment never share state.
"""

from __future__ import annotations

import numpy as np

RngStream = np.random.Generator


def make_rng(seed, *key: int) -> np.random.Generator:
    """Return a PCG64 stream for ``seed`` and an optional spawn key path."""
    if isinstance(seed, np.random.Generator):
        if key:
            raise ValueError("cannot derive a keyed sub-stream from a Generator")
        return seed
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def rng_from_state(state: dict) -> np.random.Generator:
    name = state["bit_generator"]
    if name != "PCG64":
        raise ValueError(f"unsupported bit generator {name!r}")
    bg = np.random.PCG64()
    bg.state = state
    return np.random.Generator(bg)


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic 63-bit integer seed for the sub-stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
