"""Deterministic, cross-platform random streams.

Every stochastic component in the package draws from a PCG64 generator
whose seed material is the SHA-256 hash of a root seed plus a tuple of
string tags. Hashing guarantees that streams for different purposes
("mlp-init", "shuffle", ...) are independent and that the mapping from
(seed, tags) to bits is identical on every platform numpy supports.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = b"\x1f"


def _digest(seed: int, tags: tuple) -> bytes:
    parts = [str(int(seed)).encode()] + [str(t).encode() for t in tags]
    return hashlib.sha256(_SEP.join(parts)).digest()


def stream(seed: int, *tags) -> np.random.Generator:
    """Return a PCG64 generator keyed by ``(seed, *tags)``."""
    entropy = int.from_bytes(_digest(seed, tags), "big")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def child_seed(seed: int, *tags) -> int:
    """Derive a 63-bit integer seed from ``(seed, *tags)``.

    Used when a deterministic integer has to be handed to an API that
    takes a seed rather than a generator.
    """
    return int.from_bytes(_digest(seed, tags)[:8], "big") >> 1
