"""Named, counter-based random substreams.

Every consumer of randomness asks for a stream by (run seed, scope path), e.g.
``substream(seed, "vehicle", 7)``.  Streams are mutually independent Philox
streams, so adding or removing one consumer never perturbs the draws seen by
another.  This is what makes per-vehicle behaviour stable when a scenario is
extended.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, *scope: object) -> bytes:
    """Stable 128-bit key material for a (seed, scope) pair."""
    label = "/".join(str(part) for part in scope)
    material = f"{int(seed)}|{label}".encode()
    return hashlib.sha256(material).digest()[:16]


def substream(seed: int, *scope: object) -> np.random.Generator:
    """Derive an independent generator from the run seed and a scope path.

    The same (seed, scope) always yields an identical stream, on any platform,
    regardless of how many other streams exist or in which order they were
    created.
    """
    key = np.frombuffer(stream_key(seed, *scope), dtype="<u8")
    return np.random.Generator(np.random.Philox(key=key))
