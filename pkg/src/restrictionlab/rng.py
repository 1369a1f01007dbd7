"""Seeded, splittable random streams.

All samplers draw from counter-based Philox generators keyed by
``(seed, stream, purpose)``.  Replica counts therefore never perturb each
other's streams: replica ``k`` of a run always sees the same numbers no
matter how many workers execute the ensemble or in which order.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream_generator", "stream_key"]


def stream_key(seed: int, stream: int = 0, purpose: str = "") -> int:
    """128-bit Philox key derived from (seed, stream, purpose)."""
    h = hashlib.sha256()
    h.update(b"restrictionlab")
    h.update(int(seed).to_bytes(16, "little", signed=True))
    h.update(int(stream).to_bytes(16, "little", signed=True))
    h.update(purpose.encode("utf-8"))
    return int.from_bytes(h.digest()[:16], "little")


def stream_generator(seed: int, stream: int = 0, purpose: str = "") -> np.random.Generator:
    """Independent generator for one (seed, stream, purpose) triple."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, stream, purpose)))
