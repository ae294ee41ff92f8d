"""Counter-based SplitMix64 substreams.

Every replicate owns an independent stream whose state is
``substream_key(seed, replicate_index)``. The k-th 64-bit output of a stream
with state ``s`` is ``mix64(s + (k + 1) * GOLDEN)``, which is exactly the
SplitMix64 sequence started at ``s``. Because outputs are addressed by
(replicate, counter) rather than by call order, a block of replicates can be
generated in any order or on any worker and still be bit-identical.
"""

from __future__ import annotations

import hashlib

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1
_TO_UNIT = 2.0**-53


def mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, applied elementwise to a uint64 array."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix64_int(x: int) -> int:
    return int(mix64(np.uint64(x & _MASK)))


def substream_keys(seed: int, start: int, count: int) -> np.ndarray:
    """Stream states for replicates ``start .. start + count - 1``."""
    base = np.uint64(mix64_int(seed))
    idx = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(base ^ mix64((idx + np.uint64(1)) * GOLDEN))


def derive_seed(seed: int, *labels: object) -> int:
    """Deterministic child seed for a labelled purpose (tables, trials, ...)."""
    h = hashlib.sha256(repr(labels).encode()).digest()
    return mix64_int(seed ^ int.from_bytes(h[:8], "little"))


def uniforms(keys: np.ndarray, count: int) -> np.ndarray:
    """Open-interval uniforms of shape ``(len(keys), count)``.

    Values are ``(top53 + 0.5) * 2**-53`` so they never hit 0 or 1.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    ctr = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        states = keys[:, None] + ctr[None, :] * GOLDEN
    bits = mix64(states) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * _TO_UNIT
