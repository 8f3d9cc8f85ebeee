"""Named random-stream derivation.

Every stochastic step in the pipeline draws from a generator derived from
(base seed, *names). Streams are independent of iteration order and worker
count, so any artifact is bit-reproducible from its seed set.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_rng(*keys: int | str) -> np.random.Generator:
    """Return a PCG64 generator keyed by a tuple of ints and strings.

    Strings are hashed (sha256) so dataset ids and stage names give stable
    entropy across platforms and runs; ints are used directly.
    """
    if not keys:
        raise ValueError("derive_rng needs at least one key")
    entropy: list[int] = []
    for key in keys:
        if isinstance(key, str):
            digest = hashlib.sha256(key.encode("utf-8")).digest()
            entropy.extend(
                int.from_bytes(digest[i : i + 4], "little") for i in (0, 4, 8, 12)
            )
        else:
            entropy.append(int(key) & _MASK64)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
