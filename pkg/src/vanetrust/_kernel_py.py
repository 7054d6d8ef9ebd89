"""Pure-Python SHA-256 Merkle kernels (hashlib-backed fallback).

Mirrors the compiled extension in vanetrust._kernel exactly; the two are
interchangeable and cross-checked in the test suite. All digests are 32 bytes,
levels are contiguous concatenations of 32-byte digests, and an odd trailing
node is promoted unchanged to the next level (no duplication).
"""

from __future__ import annotations

import hashlib

DIGEST_LEN = 32

BACKEND = "python"


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_leaves(items: list, tag: int) -> bytes:
    """Digest each item as sha256(tag_byte || item); returns concatenated digests."""
    t = bytes([tag])
    out = bytearray()
    for item in items:
        out += hashlib.sha256(t + item).digest()
    return bytes(out)


def parent_level(level: bytes, tag: int) -> bytes:
    """One Merkle level up: pairs hashed as sha256(tag || left || right), odd tail promoted."""
    if len(level) % DIGEST_LEN:
        raise ValueError("level length is not a multiple of 32")
    n = len(level) // DIGEST_LEN
    if n < 2:
        return level
    t = bytes([tag])
    out = bytearray()
    for i in range(0, (n - n % 2) * DIGEST_LEN, 2 * DIGEST_LEN):
        out += hashlib.sha256(t + level[i : i + 2 * DIGEST_LEN]).digest()
    if n % 2:
        out += level[-DIGEST_LEN:]
    return bytes(out)


def root_from_level(level: bytes, tag: int) -> bytes:
    """Reduce a leaf level to its Merkle root. Level must be non-empty."""
    if not level:
        raise ValueError("cannot compute the root of an empty level")
    while len(level) > DIGEST_LEN:
        level = parent_level(level, tag)
    return level


def fold_path(node: bytes, directions: bytes, siblings: bytes, tag: int) -> bytes:
    """Fold a leaf digest up an authentication path.

    directions[i] is 0 when the i-th sibling sits on the left, 1 on the right;
    siblings is the concatenation of the 32-byte sibling digests.
    """
    if len(node) != DIGEST_LEN:
        raise ValueError("node must be a 32-byte digest")
    if len(siblings) != DIGEST_LEN * len(directions):
        raise ValueError("sibling bytes do not match direction count")
    t = bytes([tag])
    for i, d in enumerate(directions):
        sib = siblings[i * DIGEST_LEN : (i + 1) * DIGEST_LEN]
        if d == 0:
            node = hashlib.sha256(t + sib + node).digest()
        elif d == 1:
            node = hashlib.sha256(t + node + sib).digest()
        else:
            raise ValueError("direction flags must be 0 or 1")
    return node
