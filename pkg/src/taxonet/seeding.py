"""Deterministic sub-seed derivation.

Every random decision in the pipeline flows from one root seed; each stage
derives its own stream from (root seed, stage label, ...) so that stages
stay independent and insensitive to each other's draw counts.  Hashing goes
through sha256 so negative seeds and arbitrary labels are fine and the
mapping is stable across platforms and processes.
"""

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Map a tuple of label/seed parts to a stable 64-bit generator seed."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(*parts) -> np.random.Generator:
    """Generator seeded from :func:`derive_seed` of the given parts."""
    return np.random.default_rng(derive_seed(*parts))
