"""Deterministic seed derivation.

All randomness in the package flows from a single 64-bit root seed.  Derived
streams are labelled by a short tag (subcommand or purpose) and an integer
index (chunk number, trial number).  The derivation is a SHA-256 digest of
the string ``"{root}:{tag}:{index}"`` folded into four 32-bit words feeding a
``numpy.random.SeedSequence``; bit generators are Philox, which is
counter-based so per-chunk streams are independent of worker count and of
each other.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed_sequence", "derive_generator"]


def derive_seed_sequence(root: int, tag: str, index: int = 0) -> np.random.SeedSequence:
    """Stable SeedSequence for stream (root, tag, index)."""
    digest = hashlib.sha256(f"{int(root)}:{tag}:{int(index)}".encode()).digest()
    words = tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))
    return np.random.SeedSequence(entropy=words)


def derive_generator(root: int, tag: str, index: int = 0) -> np.random.Generator:
    """Philox generator for stream (root, tag, index)."""
    return np.random.Generator(np.random.Philox(derive_seed_sequence(root, tag, index)))
