"""Counter-based random streams.

All randomness flows from one 64-bit seed through Philox counters, so
independent sample streams are reproducible and order-independent: stream
(seed, k) yields the same numbers no matter which worker draws them or in
which order samples are generated.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream"]


def stream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the sub-stream identified by up to three path indices."""
    counter = np.zeros(4, dtype=np.uint64)
    for i, p in enumerate(path[:3]):
        counter[3 - i] = np.uint64(p)
    bitgen = np.random.Philox(key=np.uint64(seed), counter=counter)
    return np.random.Generator(bitgen)
