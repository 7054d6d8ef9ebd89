"""The three blockchains: issued certificates (CerBC), revoked keys (RevBC),
and broadcast messages (MesBC).

Every block has an exactly-80-byte header mined against a leading-zero-bit
proof-of-work target. CerBC/MesBC headers commit the Merkle root of the
block's own records and the chain keeps a cumulative AppendTree over all
records; RevBC headers commit the post-update LexTree root (expiry pruning
then insertions), which is what absence proofs verify against. One canonical
chain per ledger; acceptance of a candidate block is gated by a strict
majority of RSU votes (quorum_accept).

Record semantics (signature checks, revocation key extraction) live above
this module and are injected as callables so the ledger stays generic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from vanetrust import kernel
from vanetrust.merkleproofs import EMPTY_ROOT, AppendTree, LexTree, MerkleError

HEADER_LEN = 80
_HEADER_FMT = ">32s32sIIHHI"  # prev, payload_root, timestamp, nonce, version, chain, difficulty
LEDGER_VERSION = 1
GENESIS_PREV = bytes(32)

CHAIN_CERT = 1
CHAIN_REV = 2
CHAIN_MSG = 3
CHAIN_NAMES = {CHAIN_CERT: "CerBC", CHAIN_REV: "RevBC", CHAIN_MSG: "MesBC"}

DEFAULT_DIFFICULTY = 8
DEFAULT_EXPIRY_WINDOW_MS = 30 * 24 * 3600 * 1000  # certificate validity default

FILE_MAGIC = b"VTBC"

RecordValidator = Callable[[int, bytes], None]
RevKeyExtractor = Callable[[bytes], tuple]


class RecordRejected(Exception):
    """A record failed validation; carries its position and the reason."""

    def __init__(self, index: int, reason: str):
        super().__init__(f"record {index} rejected: {reason}")
        self.index = index
        self.reason = reason


class BlockRejected(Exception):
    """A candidate block cannot extend the chain."""


class ChainFormatError(Exception):
    """A persisted chain file is structurally invalid or corrupt."""


@dataclass(frozen=True)
class BlockHeader:
    prev_hash: bytes
    payload_root: bytes
    timestamp: int  # unix seconds
    nonce: int
    version: int
    chain_id: int
    difficulty: int

    def pack(self) -> bytes:
        return struct.pack(
            _HEADER_FMT,
            self.prev_hash,
            self.payload_root,
            self.timestamp,
            self.nonce,
            self.version,
            self.chain_id,
            self.difficulty,
        )

    @classmethod
    def unpack(cls, data: bytes) -> "BlockHeader":
        if len(data) != HEADER_LEN:
            raise ChainFormatError(f"header must be {HEADER_LEN} bytes, got {len(data)}")
        prev, root, ts, nonce, version, chain_id, diff = struct.unpack(_HEADER_FMT, data)
        return cls(prev, root, ts, nonce, version, chain_id, diff)

    def block_hash(self) -> bytes:
        return kernel.sha256(self.pack())

    def meets_difficulty(self) -> bool:
        return int.from_bytes(self.block_hash(), "big") < (1 << (256 - self.difficulty))


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    records: tuple


class Chain:
    """One ledger: ordered blocks plus the cumulative replay state."""

    def __init__(
        self,
        chain_id: int,
        *,
        difficulty: int = DEFAULT_DIFFICULTY,
        expiry_window_ms: int = DEFAULT_EXPIRY_WINDOW_MS,
        record_validator: Optional[RecordValidator] = None,
        rev_key_extractor: Optional[RevKeyExtractor] = None,
    ):
        if chain_id not in CHAIN_NAMES:
            raise ValueError(f"unknown chain id {chain_id}")
        if chain_id == CHAIN_REV and rev_key_extractor is None:
            raise ValueError("RevBC needs a rev_key_extractor")
        self.chain_id = chain_id
        self.difficulty = difficulty
        self.expiry_window_ms = expiry_window_ms
        self.record_validator = record_validator
        self.rev_key_extractor = rev_key_extractor
        self.blocks: list[Block] = []
        if chain_id == CHAIN_REV:
            self.state: LexTree | AppendTree = LexTree()
        else:
            self.state = AppendTree()

    @property
    def name(self) -> str:
        return CHAIN_NAMES[self.chain_id]

    @property
    def height(self) -> int:
        return len(self.blocks)

    @property
    def tip_hash(self) -> bytes:
        return self.blocks[-1].header.block_hash() if self.blocks else GENESIS_PREV

    @property
    def state_root(self) -> bytes:
        """Cumulative root: AppendTree over all records, or the live LexTree."""
        return self.state.root

    def record_count(self) -> int:
        return sum(len(b.records) for b in self.blocks)

    def config_clone(self) -> "Chain":
        return Chain(
            self.chain_id,
            difficulty=self.difficulty,
            expiry_window_ms=self.expiry_window_ms,
            record_validator=self.record_validator,
            rev_key_extractor=self.rev_key_extractor,
        )

    def _check_records(self, records: Sequence[bytes]) -> None:
        for i, rec in enumerate(records):
            if not isinstance(rec, (bytes, bytearray)) or len(rec) == 0:
                raise RecordRejected(i, "empty or non-byte record")
            if self.record_validator is not None:
                try:
                    self.record_validator(self.chain_id, bytes(rec))
                except RecordRejected:
                    raise
                except Exception as exc:
                    raise RecordRejected(i, str(exc)) from exc

    def _rev_state_after(self, records: Sequence[bytes], timestamp_ms: int) -> LexTree:
        assert isinstance(self.state, LexTree)
        nxt = self.state.copy()
        nxt.remove_expired(timestamp_ms, self.expiry_window_ms)
        for i, rec in enumerate(records):
            key, t_rev = self.rev_key_extractor(bytes(rec))
            try:
                nxt.insert(key, t_rev)
            except MerkleError as exc:
                raise RecordRejected(i, str(exc)) from exc
        return nxt

    def payload_root_for(self, records: Sequence[bytes], timestamp_ms: int) -> bytes:
        """CerBC/MesBC: root over this block's records. RevBC: post-update state root."""
        if self.chain_id == CHAIN_REV:
            return self._rev_state_after(records, timestamp_ms).root
        if not records:
            return EMPTY_ROOT
        return AppendTree(records).root


def mine_block(chain: Chain, records: Sequence[bytes], timestamp_ms: int) -> Block:
    """Validate records, commit their root, and search a nonce meeting the target."""
    # coerce only real byte types; anything else must fail record validation,
    # not blow up here (bytes(5) would even "succeed" as five zero bytes)
    records = tuple(
        bytes(r) if isinstance(r, (bytes, bytearray)) else r for r in records)
    chain._check_records(records)
    payload_root = chain.payload_root_for(records, timestamp_ms)
    base = dict(
        prev_hash=chain.tip_hash,
        payload_root=payload_root,
        timestamp=timestamp_ms // 1000,
        version=LEDGER_VERSION,
        chain_id=chain.chain_id,
        difficulty=chain.difficulty,
    )
    for nonce in range(2**32):
        header = BlockHeader(nonce=nonce, **base)
        if header.meets_difficulty():
            return Block(header=header, records=records)
    raise BlockRejected("nonce space exhausted")  # unreachable at sane difficulty


def check_block(chain: Chain, block: Block) -> None:
    """Validate a candidate block against the chain tip without committing it.

    Raises BlockRejected or RecordRejected on the first failure. This is the
    whole acceptance rule, so an RSU vote is just check_block in a try block.
    """
    h = block.header
    if h.version != LEDGER_VERSION:
        raise BlockRejected(f"unsupported version {h.version}")
    if h.chain_id != chain.chain_id:
        raise BlockRejected("block belongs to a different chain")
    if h.difficulty != chain.difficulty:
        raise BlockRejected("difficulty does not match chain configuration")
    if h.prev_hash != chain.tip_hash:
        raise BlockRejected("does not link to the chain tip")
    if chain.blocks and h.timestamp < chain.blocks[-1].header.timestamp:
        raise BlockRejected("timestamp regressed")
    if not h.meets_difficulty():
        raise BlockRejected("proof of work does not meet the target")
    chain._check_records(block.records)
    if chain.payload_root_for(block.records, h.timestamp * 1000) != h.payload_root:
        raise BlockRejected("payload root does not match the records")


def append_block(chain: Chain, block: Block) -> Chain:
    """Full validation then commit; raises BlockRejected and leaves the chain unchanged."""
    check_block(chain, block)
    timestamp_ms = block.header.timestamp * 1000
    if chain.chain_id == CHAIN_REV:
        chain.state = chain._rev_state_after(block.records, timestamp_ms)
    else:
        for rec in block.records:
            chain.state.append(rec)
    chain.blocks.append(block)
    return chain


def chain_fault(chain: Chain) -> Optional[str]:
    """Replay the chain from genesis; returns the first failure or None."""
    replay = chain.config_clone()
    for i, block in enumerate(chain.blocks):
        try:
            append_block(replay, block)
        except (BlockRejected, RecordRejected) as exc:
            return f"block {i}: {exc}"
    if replay.state_root != chain.state_root:
        return "cumulative state does not match the replayed records"
    return None


def validate_chain(chain: Chain) -> bool:
    return chain_fault(chain) is None


def quorum_accept(votes: Sequence[bool]) -> bool:
    """Strict majority of RSU votes."""
    if not votes:
        raise ValueError("quorum requires at least one vote")
    return sum(1 for v in votes if v) * 2 > len(votes)


# --- persistence -------------------------------------------------------------
#
# file: "VTBC" | u16 version | u16 chain_id | u32 block count | blocks...
#       | sha256 of everything before the trailer
# block: 80B header | u32 record count | per record: u32 length | bytes


def chain_file_bytes(chain: Chain) -> bytes:
    body = bytearray()
    body += FILE_MAGIC
    body += struct.pack(">HHI", LEDGER_VERSION, chain.chain_id, len(chain.blocks))
    for block in chain.blocks:
        body += block.header.pack()
        body += struct.pack(">I", len(block.records))
        for rec in block.records:
            body += struct.pack(">I", len(rec))
            body += rec
    return bytes(body) + kernel.sha256(bytes(body))


def save_chain(chain: Chain, path) -> None:
    with open(path, "wb") as fh:
        fh.write(chain_file_bytes(chain))


def read_chain_file(path) -> tuple[int, list[Block]]:
    """Structural parse + checksum check; no consensus validation."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 + 8 + 32:
        raise ChainFormatError("file too short")
    body, trailer = data[:-32], data[-32:]
    if kernel.sha256(body) != trailer:
        raise ChainFormatError("file checksum mismatch")
    if body[:4] != FILE_MAGIC:
        raise ChainFormatError("bad magic")
    version, chain_id, n_blocks = struct.unpack(">HHI", body[4:12])
    if version != LEDGER_VERSION:
        raise ChainFormatError(f"unsupported file version {version}")
    if chain_id not in CHAIN_NAMES:
        raise ChainFormatError(f"unknown chain id {chain_id}")
    pos = 12
    blocks = []
    for _ in range(n_blocks):
        if pos + HEADER_LEN + 4 > len(body):
            raise ChainFormatError("truncated block")
        header = BlockHeader.unpack(body[pos : pos + HEADER_LEN])
        pos += HEADER_LEN
        (n_records,) = struct.unpack(">I", body[pos : pos + 4])
        pos += 4
        records = []
        for _ in range(n_records):
            if pos + 4 > len(body):
                raise ChainFormatError("truncated record length")
            (rec_len,) = struct.unpack(">I", body[pos : pos + 4])
            pos += 4
            if pos + rec_len > len(body):
                raise ChainFormatError("truncated record")
            records.append(body[pos : pos + rec_len])
            pos += rec_len
        blocks.append(Block(header=header, records=tuple(records)))
    if pos != len(body):
        raise ChainFormatError("trailing bytes after final block")
    return chain_id, blocks


def load_chain(
    path,
    *,
    difficulty: int = DEFAULT_DIFFICULTY,
    expiry_window_ms: int = DEFAULT_EXPIRY_WINDOW_MS,
    record_validator: Optional[RecordValidator] = None,
    rev_key_extractor: Optional[RevKeyExtractor] = None,
) -> Chain:
    """Parse and fully re-validate a persisted chain."""
    chain_id, blocks = read_chain_file(path)
    chain = Chain(
        chain_id,
        difficulty=difficulty,
        expiry_window_ms=expiry_window_ms,
        record_validator=record_validator,
        rev_key_extractor=rev_key_extractor,
    )
    for block in blocks:
        append_block(chain, block)
    return chain


def verify_chain_file(path, **config) -> bool:
    """True iff the file parses, checksums, and replays cleanly."""
    try:
        load_chain(path, **config)
        return True
    except (ChainFormatError, BlockRejected, RecordRejected, ValueError):
        return False
