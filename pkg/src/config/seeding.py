"""
All randomness flows from one global seed.

Each consumer asks for a generator by name (``"synth"``, ``"clf.init"``...);
the name is hashed into a stable integer and combined with the seed through
numpy's SeedSequence, so streams are independent and reproducible without
threading a Generator through every call.
"""
import hashlib

import numpy as np


def stable_name_hash(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def module_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), stable_name_hash(name)]))


def indexed_rng(seed: int, index: int) -> np.random.Generator:
    """Per-item stream, e.g. one per synthetic log file."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
