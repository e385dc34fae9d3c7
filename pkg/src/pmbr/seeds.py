"""Hierarchical seed derivation: a stable hash of the full coordinate of a random draw."""
from __future__ import annotations

import hashlib


def derive_seed(*parts) -> int:
    """Map ``(base_seed, segment_id, method, ...)`` to a 63-bit seed.

    Parts are rendered with ``str`` and joined with an unambiguous separator,
    so the result is stable across processes and Python versions.
    """
    text = "\x1f".join(f"{type(p).__name__}:{p}" for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1
