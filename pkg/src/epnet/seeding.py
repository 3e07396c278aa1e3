"""Deterministic seed derivation for independent RNG streams."""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Hash an arbitrary tag tuple into a 64-bit seed.

    Stable across runs and platforms; used wherever a sub-stream of
    randomness must be reproducible per (seed, purpose, index).
    """
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "little")
