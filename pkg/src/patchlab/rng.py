"""Deterministic keyed random streams.

Every stochastic choice in the system is drawn from a counter-based Philox
generator seeded by hashing the scenario seed together with a string key
(worker id, question key, ...). Streams are therefore independent of call
order, which keeps simulated runs reproducible under any task interleaving.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_words(part: str) -> list[int]:
    digest = hashlib.sha256(part.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 8], "little") for i in range(0, 16, 8)]


def stream(seed: int, *parts: str | int) -> np.random.Generator:
    """Generator keyed by (seed, parts); same key always yields same stream."""
    entropy: list[int] = [int(seed) & _MASK64]
    for part in parts:
        if isinstance(part, bool):
            raise TypeError("bool is not a valid stream key part")
        if isinstance(part, int):
            entropy.append(part & _MASK64)
        else:
            entropy.extend(_key_words(part))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
