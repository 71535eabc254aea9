"""Counter-based random number streams with stable keys.

Every stochastic routine in this package derives its generator from a key
tuple (master seed plus structural labels such as the time-point index).
Streams for distinct keys are independent Philox streams, so work items can
be evaluated in any order, or concurrently, and still reproduce the same
numbers.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["keyed_rng", "derive_key"]


def derive_key(*parts) -> int:
    """Map an arbitrary tuple of ints/strings to a stable 128-bit integer."""
    h = hashlib.blake2b(digest_size=16)
    for p in parts:
        if isinstance(p, (int, np.integer)):
            h.update(b"i" + int(p).to_bytes(16, "little", signed=True))
        elif isinstance(p, str):
            h.update(b"s" + p.encode())
        else:
            raise TypeError(f"unsupported key part {p!r}")
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little")


def keyed_rng(*parts) -> np.random.Generator:
    """Philox generator keyed by (seed, label, index, ...) tuples."""
    return np.random.Generator(np.random.Philox(key=derive_key(*parts)))
