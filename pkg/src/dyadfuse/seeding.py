"""Deterministic sub-seed derivation.

Every source of randomness in a run (parameter init, dropout masks, epoch
shuffling, the train/val/test split, synthetic data) draws from its own
generator, seeded by hashing the master seed together with a purpose string.
Toggling one component therefore never perturbs the random stream of another.
"""

import hashlib


def derive_seed(master_seed: int, purpose: str) -> int:
    """Return a 63-bit seed derived from ``master_seed`` and a purpose tag."""
    digest = hashlib.sha256(f"{master_seed}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFFFFFFFFFFFFFF
