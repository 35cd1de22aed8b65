"""Deterministic, platform-stable seed derivation.

A derived seed is the first 8 bytes of blake2b over the little-endian
base seed, the UTF-8 stream label with a NUL terminator, and the
little-endian index.  Distinct (stream, index) pairs collide only with
probability ~2^-64, identical inputs give identical outputs on every
platform, and the mixing is one-way, so derived streams do not overlap
even for adjacent indices.
"""

from __future__ import annotations

import hashlib

_MASK = (1 << 64) - 1


def derive_seed(base, stream, index=0):
    """Derive a 64-bit seed from (base seed, stream label, index)."""
    h = hashlib.blake2b(digest_size=8)
    h.update((int(base) & _MASK).to_bytes(8, "little"))
    h.update(str(stream).encode("utf-8"))
    h.update(b"\x00")
    h.update((int(index) & _MASK).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")
