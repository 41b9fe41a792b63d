"""Order-independent deterministic randomness derived from hashed contexts.

Every random draw in the pipeline is keyed by an explicit context tuple
(seed, video id, frame index, ...) instead of consuming a shared stream, so
results never depend on scheduling or call order across videos and workers.
"""

from __future__ import annotations

import hashlib
from typing import Any

import numpy as np

_SEP = b"\x1f"  # unit separator: keeps ("a","bc") and ("ab","c") distinct


def stable_u64(*parts: Any) -> int:
    """First 8 bytes of sha256 over the context parts, as an unsigned integer."""
    payload = _SEP.join(str(p).encode("utf-8") for p in parts)
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def stable_uniform(*parts: Any) -> float:
    """Deterministic uniform draw in [0, 1) keyed by the context parts."""
    return stable_u64(*parts) / 2**64


def stable_generator(*parts: Any) -> np.random.Generator:
    """A fresh numpy generator seeded from the context parts."""
    return np.random.Generator(np.random.PCG64(stable_u64(*parts)))
