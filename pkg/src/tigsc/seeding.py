"""Deterministic seed derivation for independent RNG streams."""

import hashlib


def derive_seed(*parts) -> int:
    """Map an arbitrary tuple of ints/strings to a stable 63-bit seed.

    Streams derived from distinct part tuples are independent for all
    practical purposes, so concurrent consumers (data loading, channel
    sampling, sweep cells) never share state.
    """
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "big") & (2**63 - 1)
