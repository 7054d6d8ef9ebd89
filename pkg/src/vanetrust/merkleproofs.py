"""Authenticated data structures backing the certificate and revocation ledgers.

Two trees:

* AppendTree: append-only Merkle tree over record digests; yields logarithmic
  proofs of presence for issued certificates and recorded messages.
* LexTree: Merkle tree over lexicographically sorted (public key, revocation
  time) entries; yields proofs of absence for non-revoked keys as two
  authenticated co-paths to an adjacent boundary pair straddling the target.

Encoding: leaf digest = sha256(0x00 || payload), interior = sha256(0x01 ||
left || right); the distinct tags prevent leaf/interior splices. An odd node
at any level is promoted unchanged (no duplication), so proof length never
exceeds ceil(log2(n)). LexTree leaves are payload = key || big-endian 64-bit
revocation time; two sentinel entries (empty key, 33*0xff) bound the key space
so every absent target has an adjacent pair.
"""

from __future__ import annotations

import struct
from bisect import bisect_left
from dataclasses import dataclass

from vanetrust import kernel

DIGEST_LEN = 32
LEAF_TAG = 0x00
NODE_TAG = 0x01

LEFT = 0  # sibling sits on the left
RIGHT = 1  # sibling sits on the right

MIN_KEY = b""
MAX_KEY = b"\xff" * 33
KEY_FIELD_LEN = 33

EMPTY_ROOT = bytes(DIGEST_LEN)

PROOF_PRESENCE = 0x01
PROOF_ABSENCE = 0x02


class MerkleError(Exception):
    """Invalid tree operation (bad index, duplicate key, present target...)."""


class ProofFormatError(Exception):
    """Serialized proof bytes are malformed."""


def leaf_digest(payload: bytes) -> bytes:
    return kernel.sha256(bytes([LEAF_TAG]) + payload)


def lex_leaf_digest(key: bytes, rev_time: int) -> bytes:
    return leaf_digest(key + struct.pack(">Q", rev_time))


def canonical_directions(index: int, size: int) -> bytes:
    """Sibling-side flags for the leaf at `index` in a promotion tree of `size` leaves.

    Promotion steps (unpaired right edge) consume no flag, so the result is the
    exact dir sequence a valid proof for (index, size) must carry.
    """
    if not 0 <= index < size:
        raise MerkleError(f"index {index} out of range for size {size}")
    dirs = bytearray()
    pos, level = index, size
    while level > 1:
        if pos % 2 == 1:
            dirs.append(LEFT)
        elif pos + 1 < level:
            dirs.append(RIGHT)
        pos //= 2
        level = (level + 1) // 2
    return bytes(dirs)


@dataclass(frozen=True)
class PresenceProof:
    """Authentication path: per step, the sibling's side and its digest."""

    directions: bytes
    siblings: tuple[bytes, ...]

    def __len__(self) -> int:
        return len(self.directions)


@dataclass(frozen=True)
class BoundaryEntry:
    """One end of an absence proof's straddling pair."""

    key: bytes
    rev_time: int
    index: int  # position in the sorted leaf traversal, sentinels included


@dataclass(frozen=True)
class AbsenceProof:
    """Two co-paths authenticating an adjacent pair that straddles the target."""

    tree_size: int  # physical leaf count (sentinels included)
    lower: BoundaryEntry
    upper: BoundaryEntry
    lower_path: PresenceProof
    upper_path: PresenceProof


class _LevelCache:
    """Shared lazy level builder for both trees.

    Takes a zero-arg leaf-level builder so cache hits skip rebuilding (and
    copying) the leaf buffer; that keeps repeated proof generation O(log n).
    """

    def __init__(self) -> None:
        self._levels: list[bytes] | None = None

    def invalidate(self) -> None:
        self._levels = None

    def levels(self, build_leaf_level) -> list[bytes]:
        if self._levels is None:
            levels = [build_leaf_level()]
            while len(levels[-1]) > DIGEST_LEN:
                levels.append(kernel.parent_level(levels[-1], NODE_TAG))
            self._levels = levels
        return self._levels


def _prove_from_levels(levels: list[bytes], index: int) -> PresenceProof:
    dirs = bytearray()
    sibs: list[bytes] = []
    pos = index
    for level in levels[:-1]:
        n = len(level) // DIGEST_LEN
        if pos % 2 == 1:
            dirs.append(LEFT)
            sibs.append(level[(pos - 1) * DIGEST_LEN : pos * DIGEST_LEN])
        elif pos + 1 < n:
            dirs.append(RIGHT)
            sibs.append(level[(pos + 1) * DIGEST_LEN : (pos + 2) * DIGEST_LEN])
        pos //= 2
    return PresenceProof(directions=bytes(dirs), siblings=tuple(sibs))


class AppendTree:
    """Append-only Merkle tree over record digests."""

    def __init__(self, records=()):
        self._leaves = bytearray()
        self._cache = _LevelCache()
        if records:
            self.extend(records)

    def __len__(self) -> int:
        return len(self._leaves) // DIGEST_LEN

    def append(self, record: bytes) -> tuple[bytes, int]:
        """Hash and append one record; returns (new root, leaf index)."""
        index = len(self)
        self._leaves += leaf_digest(record)
        self._cache.invalidate()
        return self.root, index

    def extend(self, records) -> None:
        self._leaves += kernel.hash_leaves(list(records), LEAF_TAG)
        self._cache.invalidate()

    def append_digests(self, digests: bytes) -> None:
        """Append pre-computed leaf digests (bulk construction)."""
        if len(digests) % DIGEST_LEN:
            raise MerkleError("digest buffer length must be a multiple of 32")
        self._leaves += digests
        self._cache.invalidate()

    def leaf_digest_at(self, index: int) -> bytes:
        if not 0 <= index < len(self):
            raise MerkleError(f"leaf index {index} out of range")
        return bytes(self._leaves[index * DIGEST_LEN : (index + 1) * DIGEST_LEN])

    @property
    def root(self) -> bytes:
        if not self._leaves:
            return EMPTY_ROOT
        return self._cache.levels(lambda: bytes(self._leaves))[-1]

    def prove_presence(self, index: int) -> PresenceProof:
        if not 0 <= index < len(self):
            raise MerkleError(f"leaf index {index} out of range")
        return _prove_from_levels(self._cache.levels(lambda: bytes(self._leaves)), index)


def verify_presence(root: bytes, leaf: bytes, proof: PresenceProof) -> bool:
    """True iff folding sha256(0x00 || leaf) up the proof reproduces root."""
    try:
        if len(root) != DIGEST_LEN or len(proof.siblings) != len(proof.directions):
            return False
        if any(len(s) != DIGEST_LEN for s in proof.siblings):
            return False
        folded = kernel.fold_path(
            leaf_digest(leaf), proof.directions, b"".join(proof.siblings), NODE_TAG
        )
    except (ValueError, TypeError, AttributeError):
        return False
    return folded == root


class LexTree:
    """Merkle tree over lexicographically sorted revoked keys.

    Entries are (key, rev_time) with keys strictly between the MIN and MAX
    sentinels; the sentinels are physical leaves and never expire.
    """

    def __init__(self, entries=()):
        self._keys: list[bytes] = []
        self._times: list[int] = []
        self._cache = _LevelCache()
        # Bulk load: sort once instead of insert-per-entry, which would
        # recompute the root m times (quadratic at benchmark scales).
        for key, rev_time in sorted(entries):
            if not MIN_KEY < key < MAX_KEY:
                raise MerkleError("key collides with a sentinel bound")
            if self._keys and self._keys[-1] == key:
                raise MerkleError("key already revoked")
            self._keys.append(key)
            self._times.append(rev_time)

    def __len__(self) -> int:
        """Number of user entries (sentinels excluded)."""
        return len(self._keys)

    @property
    def leaf_count(self) -> int:
        """Physical leaf count, sentinels included."""
        return len(self._keys) + 2

    def __contains__(self, key: bytes) -> bool:
        i = bisect_left(self._keys, key)
        return i < len(self._keys) and self._keys[i] == key

    def entries(self) -> list[tuple[bytes, int]]:
        return list(zip(self._keys, self._times))

    def copy(self) -> LexTree:
        clone = LexTree()
        clone._keys = list(self._keys)
        clone._times = list(self._times)
        return clone

    def insert(self, key: bytes, rev_time: int) -> bytes:
        """Insert a revoked key; returns the new root. Duplicate keys error."""
        if not MIN_KEY < key < MAX_KEY:
            raise MerkleError("key collides with a sentinel bound")
        i = bisect_left(self._keys, key)
        if i < len(self._keys) and self._keys[i] == key:
            raise MerkleError("key already revoked")
        self._keys.insert(i, key)
        self._times.insert(i, rev_time)
        self._cache.invalidate()
        return self.root

    def insert_many(self, pairs) -> bytes:
        for key, rev_time in pairs:
            if not MIN_KEY < key < MAX_KEY:
                raise MerkleError("key collides with a sentinel bound")
            i = bisect_left(self._keys, key)
            if i < len(self._keys) and self._keys[i] == key:
                raise MerkleError("key already revoked")
            self._keys.insert(i, key)
            self._times.insert(i, rev_time)
        self._cache.invalidate()
        return self.root

    def remove_expired(self, now: int, expiry_window: int) -> bytes:
        """Drop entries with rev_time + expiry_window <= now; returns the new root."""
        keep = [
            (k, t) for k, t in zip(self._keys, self._times) if t + expiry_window > now
        ]
        if len(keep) != len(self._keys):
            self._keys = [k for k, _ in keep]
            self._times = [t for _, t in keep]
            self._cache.invalidate()
        return self.root

    def _leaf_level(self) -> bytes:
        leaves = [lex_leaf_digest(MIN_KEY, 0)]
        leaves += [lex_leaf_digest(k, t) for k, t in zip(self._keys, self._times)]
        leaves.append(lex_leaf_digest(MAX_KEY, 0))
        return b"".join(leaves)

    @property
    def root(self) -> bytes:
        return self._cache.levels(self._leaf_level)[-1]

    def _boundary(self, physical_index: int) -> BoundaryEntry:
        if physical_index == 0:
            return BoundaryEntry(MIN_KEY, 0, 0)
        if physical_index == self.leaf_count - 1:
            return BoundaryEntry(MAX_KEY, 0, physical_index)
        return BoundaryEntry(
            self._keys[physical_index - 1], self._times[physical_index - 1], physical_index
        )

    def prove_absence(self, target: bytes) -> AbsenceProof:
        """Proof that target is not revoked. Errors if target is present."""
        if not MIN_KEY < target < MAX_KEY:
            raise MerkleError("target outside the provable key space")
        if target in self:
            raise MerkleError("target is revoked; no absence proof exists")
        gap = bisect_left(self._keys, target)  # entries[gap-1] < target < entries[gap]
        levels = self._cache.levels(self._leaf_level)
        return AbsenceProof(
            tree_size=self.leaf_count,
            lower=self._boundary(gap),
            upper=self._boundary(gap + 1),
            lower_path=_prove_from_levels(levels, gap),
            upper_path=_prove_from_levels(levels, gap + 1),
        )


def _boundary_authenticates(root: bytes, entry: BoundaryEntry, path: PresenceProof,
                            tree_size: int) -> bool:
    try:
        expected = canonical_directions(entry.index, tree_size)
    except MerkleError:
        return False
    if path.directions != expected or len(path.siblings) != len(expected):
        return False
    if any(len(s) != DIGEST_LEN for s in path.siblings):
        return False
    folded = kernel.fold_path(
        lex_leaf_digest(entry.key, entry.rev_time),
        path.directions,
        b"".join(path.siblings),
        NODE_TAG,
    )
    return folded == root


def verify_absence(root: bytes, target: bytes, proof: AbsenceProof) -> bool:
    """True iff both boundary paths authenticate against root, the boundary
    leaves are adjacent in the sorted traversal, and lower < target < upper."""
    try:
        if len(root) != DIGEST_LEN or proof.tree_size < 2:
            return False
        lo, hi = proof.lower, proof.upper
        if hi.index != lo.index + 1 or not 0 <= lo.index < proof.tree_size - 1:
            return False
        if not lo.key < target < hi.key:
            return False
        return _boundary_authenticates(
            root, lo, proof.lower_path, proof.tree_size
        ) and _boundary_authenticates(root, hi, proof.upper_path, proof.tree_size)
    except (ValueError, TypeError, AttributeError):
        return False


# --- wire format -----------------------------------------------------------
#
# presence: 0x01 | u16 steps | steps * (1B dir | 32B sibling)
# absence:  0x02 | u32 tree_size | boundary(lower) | boundary(upper)
#               | u16 steps | steps... | u16 steps | steps...
# boundary: 1B key length | 33B key field (zero-padded) | u64 rev_time | u32 index

_BOUNDARY_LEN = 1 + KEY_FIELD_LEN + 8 + 4


def _pack_steps(path: PresenceProof) -> bytes:
    out = bytearray(struct.pack(">H", len(path.directions)))
    for d, s in zip(path.directions, path.siblings):
        out.append(d)
        out += s
    return bytes(out)


def _pack_boundary(entry: BoundaryEntry) -> bytes:
    if len(entry.key) > KEY_FIELD_LEN:
        raise ProofFormatError("boundary key longer than the key field")
    padded = entry.key + bytes(KEY_FIELD_LEN - len(entry.key))
    return struct.pack(">B", len(entry.key)) + padded + struct.pack(
        ">QI", entry.rev_time, entry.index
    )


def serialize_proof(proof) -> bytes:
    if isinstance(proof, PresenceProof):
        return bytes([PROOF_PRESENCE]) + _pack_steps(proof)
    if isinstance(proof, AbsenceProof):
        return (
            bytes([PROOF_ABSENCE])
            + struct.pack(">I", proof.tree_size)
            + _pack_boundary(proof.lower)
            + _pack_boundary(proof.upper)
            + _pack_steps(proof.lower_path)
            + _pack_steps(proof.upper_path)
        )
    raise ProofFormatError(f"not a proof: {type(proof).__name__}")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ProofFormatError("truncated proof")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ProofFormatError("trailing bytes after proof")


def _read_steps(r: _Reader) -> PresenceProof:
    (count,) = struct.unpack(">H", r.take(2))
    dirs = bytearray()
    sibs = []
    for _ in range(count):
        d = r.take(1)[0]
        if d not in (LEFT, RIGHT):
            raise ProofFormatError("direction flag must be 0 or 1")
        dirs.append(d)
        sibs.append(r.take(DIGEST_LEN))
    return PresenceProof(directions=bytes(dirs), siblings=tuple(sibs))


def _read_boundary(r: _Reader) -> BoundaryEntry:
    key_len = r.take(1)[0]
    if key_len > KEY_FIELD_LEN:
        raise ProofFormatError("boundary key length exceeds the key field")
    field = r.take(KEY_FIELD_LEN)
    if any(field[key_len:]):
        raise ProofFormatError("non-zero padding in boundary key field")
    rev_time, index = struct.unpack(">QI", r.take(12))
    return BoundaryEntry(key=field[:key_len], rev_time=rev_time, index=index)


def deserialize_proof(data: bytes):
    """Parse a serialized proof; raises ProofFormatError on malformed bytes."""
    r = _Reader(data)
    kind = r.take(1)[0]
    if kind == PROOF_PRESENCE:
        proof = _read_steps(r)
        r.done()
        return proof
    if kind == PROOF_ABSENCE:
        (tree_size,) = struct.unpack(">I", r.take(4))
        lower = _read_boundary(r)
        upper = _read_boundary(r)
        lower_path = _read_steps(r)
        upper_path = _read_steps(r)
        r.done()
        return AbsenceProof(tree_size, lower, upper, lower_path, upper_path)
    raise ProofFormatError(f"unknown proof type 0x{kind:02x}")
