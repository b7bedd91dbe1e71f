"""Deterministic seed derivation and fold assignment.

Every stochastic component draws from a stream keyed by the master seed
plus a structural path (speaker id, category index, boosting round, ...),
so results do not depend on iteration order, thread count, or Python's
per-process hash salt.
"""

import hashlib

import numpy as np

_SEP = b"\x1f"


def derive_seed(*parts) -> int:
    """Stable 64-bit integer from heterogeneous key parts."""
    raw = _SEP.join(str(p).encode("utf-8") for p in parts)
    return int.from_bytes(hashlib.blake2b(raw, digest_size=8).digest(), "big")


def child_rng(*parts) -> np.random.Generator:
    """Generator seeded from the derived key."""
    return np.random.default_rng(derive_seed(*parts))


def fold_assignments(ids, n_folds, *parts) -> dict:
    """Balanced fold split, independent of input order and of targets.

    Ids are ranked by a keyed hash and dealt round-robin, so folds have
    near-equal sizes and the assignment of any id depends only on the id
    set, the fold count, and the key parts.
    """
    if n_folds < 1:
        raise ValueError("n_folds must be >= 1")
    ranked = sorted(ids, key=lambda s: (derive_seed(*parts, s), s))
    return {s: i % n_folds for i, s in enumerate(ranked)}
