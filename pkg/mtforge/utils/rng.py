# mtforge/utils/rng.py
"""
Seed derivation. Every random choice in mtforge comes from a random.Random
seeded by hashing the global seed together with a stream label, so shards
(language, pool, purpose) get independent but reproducible generators.
"""

import hashlib
import random


def derive_seed(seed: int, *labels: str) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode("ascii"))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest(), "big")


def rng_for(seed: int, *labels: str) -> random.Random:
    return random.Random(derive_seed(seed, *labels))


def shuffled_indices(n: int, seed: int, *labels: str):
    order = list(range(n))
    rng_for(seed, *labels).shuffle(order)
    return order
