"""
core.seeding
~~~~~~~~~~~~
One root seed fans out to every component seed.

Scheme
------
    derive_seed(root, *keys)

feeds ``[root, key_1, key_2, ...]`` into ``numpy.random.SeedSequence`` and
returns the first 32-bit word of its state. Integer keys are used as-is
(masked to 64 bits), string keys are hashed with SHA-256 and the first 8
bytes read little-endian. The same inputs always give the same seed on
every platform.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(root: int, *keys: int | str) -> int:
    entropy = [int(root) & _MASK64] + [_key_to_int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _key_to_int(key: int | str) -> int:
    if isinstance(key, str):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    return int(key) & _MASK64
