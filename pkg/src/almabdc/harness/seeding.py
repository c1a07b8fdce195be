"""Stable seed derivation.

Seeds are BLAKE2b digests of the textual parts, so they do not depend on
Python's hash randomisation, platform or the order cells are run in.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: object) -> int:
    """64-bit seed from the ``str`` of each part joined by ``|``."""
    text = "|".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def oracle_rng(base_seed: int, case: str, replicate: int) -> np.random.Generator:
    """Stream that builds the replicate's problem; shared by every strategy and K."""
    return np.random.default_rng(derive_seed(base_seed, case, "oracle", replicate))


def noise_entropy(base_seed: int, case: str, replicate: int) -> int:
    return derive_seed(base_seed, case, "noise", replicate)


def query_rng(entropy: int, query: int) -> np.random.Generator:
    """Observation noise for query number ``query`` of one replicate."""
    return np.random.default_rng([entropy, query])


def policy_rng(base_seed: int, case: str, strategy: str, k: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base_seed, case, strategy, k, replicate))
