"""Deterministic seed derivation.

Sub-seeds are hashed from (master seed, string tags) with a stable digest,
never the salted builtin ``hash``, so results are identical across
processes and machines and independent of execution order.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *tags) -> int:
    material = repr((int(master),) + tuple(str(t) for t in tags)).encode("utf-8")
    digest = hashlib.blake2b(material, digest_size=8).digest()
    return int.from_bytes(digest, "little")
