"""Counter-based random streams derived from a single 64-bit master seed.

Every stochastic operation in the package pulls from a named stream so that
results are reproducible and independent of evaluation order: stream
(seed, name, index) always yields the same draws no matter when or where it
is opened.  Philox is counter-based, so per-sample streams are cheap.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _stream_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Open the named sub-stream of `seed`.

    `index` selects an element of a stream family (one per sample, per
    training step, ...).  Streams with distinct (name, index) are
    statistically independent.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=(_stream_key(name), int(index)))
    return np.random.Generator(np.random.Philox(ss))
