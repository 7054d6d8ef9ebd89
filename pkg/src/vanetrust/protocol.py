"""Anonymous credential protocol between four parties.

* LawEnforcementAuthority (LEA): keeps the only identity database, validates
  registrations and key updates, signs warrants and revocation orders, and
  judges disputed events against the live reputation scores.
* CertificateAuthority (CA): turns warrants into certificates and countersigns
  revocations. It never learns identities or old/new key pairings; its full
  input transcript is retained so tests can audit that.
* Vehicle: owns a chain of pseudonymous keypairs, requests registration and
  key updates (encrypted to LEA), and signs broadcasts.
* RoadsideUnit (RSU): validates records and votes on candidate blocks.

A vehicle authenticates with an AuthPacket: its certificate, a proof that the
certificate is recorded in CerBC, and a proof that its key is absent from
RevBC. Broadcasts carry a timestamp covered by the signature and are rejected
outside a freshness window.

All messages serialize to a 1-byte type tag plus fixed struct fields
(variable fields length-prefixed), the same framing ledger records use.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from random import Random
from typing import Callable, Optional

from vanetrust import ledger, reputation
from vanetrust.ledger import (
    CHAIN_CERT,
    CHAIN_MSG,
    CHAIN_REV,
    Chain,
    check_block,
    mine_block,
    quorum_accept,
)
from vanetrust.merkleproofs import (
    AbsenceProof,
    AppendTree,
    LexTree,
    PresenceProof,
    deserialize_proof,
    leaf_digest,
    serialize_proof,
    verify_absence,
    verify_presence,
)
from vanetrust.reputation import (
    ALERT_LEVELS,
    CLAIM_FORGED,
    CLAIM_MISBEHAVIOR,
    INITIAL_SCORE,
    ReputationRecord,
    ScoreChange,
    UnknownParticipantError,
)
from vanetrust.sigcrypt import (
    PUBLIC_KEY_LEN,
    SIGNATURE_LEN,
    decrypt,
    enc_keygen,
    encrypt,
    keygen,
    sha256,
    sign,
    verify,
)

DEFAULT_CERT_VALIDITY_MS = ledger.DEFAULT_EXPIRY_WINDOW_MS  # 30 days
FRESHNESS_WINDOW_MS = 5_000

TAG_CERTIFICATE = 0x01
TAG_WARRANT = 0x02
TAG_REVOCATION_ORDER = 0x03
TAG_REVOCATION = 0x04
TAG_UPDATE_REQUEST = 0x05
TAG_REGISTRATION_REQUEST = 0x06
TAG_BEACON = 0x07
TAG_ALERT = 0x08
TAG_DISCLOSURE = 0x09
TAG_AUTH_PACKET = 0x0A

REJECT_EXPIRED = "expired"
REJECT_CA_SIG = "ca_signature"
REJECT_LEA_SIG = "lea_signature"
REJECT_PRESENCE = "presence"
REJECT_ABSENCE = "absence"
REJECT_STALE = "stale"
REJECT_KEY_MISMATCH = "key_mismatch"
REJECT_SIGNATURE = "signature"


class ProtocolError(Exception):
    """A request was refused or a message is malformed."""


def _need(name: str, value: bytes, length: int) -> None:
    if not isinstance(value, bytes) or len(value) != length:
        raise ProtocolError(f"{name} must be {length} bytes")


# --- signed payloads ----------------------------------------------------------
# Each signature covers a domain-tagged payload so a signature can never be
# replayed as a different message type.


def certificate_payload(pu_vehicle: bytes, score: float, expiry_ms: int) -> bytes:
    return b"cert" + pu_vehicle + struct.pack(">dQ", score, expiry_ms)


def revocation_payload(pu_rev: bytes, t_rev_ms: int) -> bytes:
    return b"rev" + pu_rev + struct.pack(">Q", t_rev_ms)


# --- message types ------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    """Pseudonymous credential: two authority signatures over (key, score, expiry)."""

    pu_ca: bytes
    sig_ca: bytes
    pu_lea: bytes
    sig_lea: bytes
    pu_vehicle: bytes
    reputation: float
    expiry_ms: int

    def __post_init__(self):
        _need("pu_ca", self.pu_ca, PUBLIC_KEY_LEN)
        _need("sig_ca", self.sig_ca, SIGNATURE_LEN)
        _need("pu_lea", self.pu_lea, PUBLIC_KEY_LEN)
        _need("sig_lea", self.sig_lea, SIGNATURE_LEN)
        _need("pu_vehicle", self.pu_vehicle, PUBLIC_KEY_LEN)

    def signed_payload(self) -> bytes:
        return certificate_payload(self.pu_vehicle, self.reputation, self.expiry_ms)

    def pack(self) -> bytes:
        return (self.pu_ca + self.sig_ca + self.pu_lea + self.sig_lea
                + self.pu_vehicle + struct.pack(">dQ", self.reputation, self.expiry_ms))

    @classmethod
    def unpack(cls, body: bytes) -> "Certificate":
        if len(body) != 240:
            raise ProtocolError(f"certificate body must be 240 bytes, got {len(body)}")
        score, expiry = struct.unpack(">dQ", body[224:240])
        return cls(body[0:32], body[32:96], body[96:128], body[128:192],
                   body[192:224], score, expiry)


@dataclass(frozen=True)
class Warrant:
    """LEA's issuance instruction to CA: the new key only, never the old one."""

    subject_pu: bytes
    reputation: float
    expiry_ms: int
    sig_lea: bytes

    def __post_init__(self):
        _need("subject_pu", self.subject_pu, PUBLIC_KEY_LEN)
        _need("sig_lea", self.sig_lea, SIGNATURE_LEN)

    def pack(self) -> bytes:
        return self.subject_pu + struct.pack(">dQ", self.reputation, self.expiry_ms) + self.sig_lea

    @classmethod
    def unpack(cls, body: bytes) -> "Warrant":
        if len(body) != 112:
            raise ProtocolError(f"warrant body must be 112 bytes, got {len(body)}")
        score, expiry = struct.unpack(">dQ", body[32:48])
        return cls(body[0:32], score, expiry, body[48:112])


@dataclass(frozen=True)
class RevocationOrder:
    """LEA's signed revocation instruction to CA."""

    subject_pu: bytes
    t_rev_ms: int
    sig_lea: bytes

    def __post_init__(self):
        _need("subject_pu", self.subject_pu, PUBLIC_KEY_LEN)
        _need("sig_lea", self.sig_lea, SIGNATURE_LEN)

    def pack(self) -> bytes:
        return self.subject_pu + struct.pack(">Q", self.t_rev_ms) + self.sig_lea

    @classmethod
    def unpack(cls, body: bytes) -> "RevocationOrder":
        if len(body) != 104:
            raise ProtocolError(f"revocation order body must be 104 bytes, got {len(body)}")
        (t_rev,) = struct.unpack(">Q", body[32:40])
        return cls(body[0:32], t_rev, body[40:104])


@dataclass(frozen=True)
class RevocationMessage:
    """Doubly signed revocation of one public key, recorded in RevBC."""

    pu_ca: bytes
    sig_ca: bytes
    pu_lea: bytes
    sig_lea: bytes
    pu_rev: bytes
    t_rev_ms: int

    def __post_init__(self):
        _need("pu_ca", self.pu_ca, PUBLIC_KEY_LEN)
        _need("sig_ca", self.sig_ca, SIGNATURE_LEN)
        _need("pu_lea", self.pu_lea, PUBLIC_KEY_LEN)
        _need("sig_lea", self.sig_lea, SIGNATURE_LEN)
        _need("pu_rev", self.pu_rev, PUBLIC_KEY_LEN)

    def signed_payload(self) -> bytes:
        return revocation_payload(self.pu_rev, self.t_rev_ms)

    def pack(self) -> bytes:
        return (self.pu_ca + self.sig_ca + self.pu_lea + self.sig_lea
                + self.pu_rev + struct.pack(">Q", self.t_rev_ms))

    @classmethod
    def unpack(cls, body: bytes) -> "RevocationMessage":
        if len(body) != 232:
            raise ProtocolError(f"revocation body must be 232 bytes, got {len(body)}")
        (t_rev,) = struct.unpack(">Q", body[224:232])
        return cls(body[0:32], body[32:96], body[96:128], body[128:192],
                   body[192:224], t_rev)


@dataclass(frozen=True)
class UpdateRequest:
    """Key rotation request, signed by the outgoing key; sent encrypted to LEA."""

    current_pu: bytes
    new_pu: bytes
    identity_proof: bytes
    sig: bytes

    def __post_init__(self):
        _need("current_pu", self.current_pu, PUBLIC_KEY_LEN)
        _need("new_pu", self.new_pu, PUBLIC_KEY_LEN)
        _need("sig", self.sig, SIGNATURE_LEN)

    def signed_payload(self) -> bytes:
        return (b"update" + self.current_pu + self.new_pu
                + struct.pack(">H", len(self.identity_proof)) + self.identity_proof)

    def pack(self) -> bytes:
        return (self.current_pu + self.new_pu
                + struct.pack(">H", len(self.identity_proof)) + self.identity_proof
                + self.sig)

    @classmethod
    def unpack(cls, body: bytes) -> "UpdateRequest":
        if len(body) < 32 + 32 + 2 + 64:
            raise ProtocolError("update request body truncated")
        (proof_len,) = struct.unpack(">H", body[64:66])
        end = 66 + proof_len
        if len(body) != end + 64:
            raise ProtocolError("update request length mismatch")
        return cls(body[0:32], body[32:64], body[66:end], body[end:])


@dataclass(frozen=True)
class RegistrationRequest:
    """Initial enrolment: identity material plus the first public key; sent
    encrypted to LEA and never seen by anyone else."""

    identity: bytes
    initial_pu: bytes
    identity_proof: bytes

    def __post_init__(self):
        _need("initial_pu", self.initial_pu, PUBLIC_KEY_LEN)
        if not self.identity:
            raise ProtocolError("identity must be non-empty")

    def pack(self) -> bytes:
        return (struct.pack(">H", len(self.identity)) + self.identity
                + self.initial_pu
                + struct.pack(">H", len(self.identity_proof)) + self.identity_proof)

    @classmethod
    def unpack(cls, body: bytes) -> "RegistrationRequest":
        if len(body) < 2:
            raise ProtocolError("registration body truncated")
        (id_len,) = struct.unpack(">H", body[0:2])
        pos = 2 + id_len
        if len(body) < pos + 32 + 2:
            raise ProtocolError("registration body truncated")
        identity = body[2:pos]
        initial_pu = body[pos:pos + 32]
        (proof_len,) = struct.unpack(">H", body[pos + 32:pos + 34])
        end = pos + 34 + proof_len
        if len(body) != end:
            raise ProtocolError("registration body length mismatch")
        return cls(identity, initial_pu, body[pos + 34:end])


@dataclass(frozen=True)
class BeaconMessage:
    """Periodic safety broadcast: position under a timestamped signature."""

    sender_pu: bytes
    timestamp_ms: int
    position_km: float
    sig: bytes

    def __post_init__(self):
        _need("sender_pu", self.sender_pu, PUBLIC_KEY_LEN)
        _need("sig", self.sig, SIGNATURE_LEN)

    def signed_payload(self) -> bytes:
        return b"beacon" + self.sender_pu + struct.pack(">Qd", self.timestamp_ms, self.position_km)

    def pack(self) -> bytes:
        return self.sender_pu + struct.pack(">Qd", self.timestamp_ms, self.position_km) + self.sig

    @classmethod
    def unpack(cls, body: bytes) -> "BeaconMessage":
        if len(body) != 112:
            raise ProtocolError(f"beacon body must be 112 bytes, got {len(body)}")
        ts, pos = struct.unpack(">Qd", body[32:48])
        return cls(body[0:32], ts, pos, body[48:112])


@dataclass(frozen=True)
class AlertMessage:
    """Event warning at a criticality level (1 most critical .. 3 least)."""

    sender_pu: bytes
    timestamp_ms: int
    event_id: int
    level: int
    position_km: float
    sig: bytes

    def __post_init__(self):
        _need("sender_pu", self.sender_pu, PUBLIC_KEY_LEN)
        _need("sig", self.sig, SIGNATURE_LEN)
        if self.level not in ALERT_LEVELS:
            raise ProtocolError(f"alert level must be one of {ALERT_LEVELS}")

    def signed_payload(self) -> bytes:
        return b"alert" + self.sender_pu + struct.pack(
            ">QIBd", self.timestamp_ms, self.event_id, self.level, self.position_km)

    def pack(self) -> bytes:
        return self.sender_pu + struct.pack(
            ">QIBd", self.timestamp_ms, self.event_id, self.level, self.position_km) + self.sig

    @classmethod
    def unpack(cls, body: bytes) -> "AlertMessage":
        if len(body) != 117:
            raise ProtocolError(f"alert body must be 117 bytes, got {len(body)}")
        ts, event_id, level, pos = struct.unpack(">QIBd", body[32:53])
        return cls(body[0:32], ts, event_id, level, pos, body[53:117])


@dataclass(frozen=True)
class DisclosureMessage:
    """Dispute of a prior alert, accusing its sender of forgery or misbehavior."""

    sender_pu: bytes
    timestamp_ms: int
    event_id: int
    accused_pu: bytes
    claim: int
    sig: bytes

    def __post_init__(self):
        _need("sender_pu", self.sender_pu, PUBLIC_KEY_LEN)
        _need("accused_pu", self.accused_pu, PUBLIC_KEY_LEN)
        _need("sig", self.sig, SIGNATURE_LEN)
        if self.claim not in (CLAIM_FORGED, CLAIM_MISBEHAVIOR):
            raise ProtocolError("unknown disclosure claim")

    def signed_payload(self) -> bytes:
        return (b"disc" + self.sender_pu
                + struct.pack(">QI", self.timestamp_ms, self.event_id)
                + self.accused_pu + struct.pack(">B", self.claim))

    def pack(self) -> bytes:
        return (self.sender_pu + struct.pack(">QI", self.timestamp_ms, self.event_id)
                + self.accused_pu + struct.pack(">B", self.claim) + self.sig)

    @classmethod
    def unpack(cls, body: bytes) -> "DisclosureMessage":
        if len(body) != 141:
            raise ProtocolError(f"disclosure body must be 141 bytes, got {len(body)}")
        ts, event_id = struct.unpack(">QI", body[32:44])
        (claim,) = struct.unpack(">B", body[76:77])
        return cls(body[0:32], ts, event_id, body[44:76], claim, body[77:141])


@dataclass(frozen=True)
class AuthPacket:
    """Certificate plus the two proofs a verifier needs: presence of the
    certificate in CerBC and absence of the key from RevBC (at a stated
    block height)."""

    certificate: Certificate
    cert_index: int
    presence: PresenceProof
    revbc_height: int
    absence: AbsenceProof

    def pack(self) -> bytes:
        pres = serialize_proof(self.presence)
        absn = serialize_proof(self.absence)
        return (self.certificate.pack()
                + struct.pack(">II", self.cert_index, self.revbc_height)
                + struct.pack(">H", len(pres)) + pres
                + struct.pack(">H", len(absn)) + absn)

    @classmethod
    def unpack(cls, body: bytes) -> "AuthPacket":
        if len(body) < 240 + 8 + 2:
            raise ProtocolError("auth packet truncated")
        cert = Certificate.unpack(body[0:240])
        cert_index, height = struct.unpack(">II", body[240:248])
        (pres_len,) = struct.unpack(">H", body[248:250])
        pos = 250 + pres_len
        if len(body) < pos + 2:
            raise ProtocolError("auth packet truncated")
        presence = deserialize_proof(body[250:pos])
        (abs_len,) = struct.unpack(">H", body[pos:pos + 2])
        end = pos + 2 + abs_len
        if len(body) != end:
            raise ProtocolError("auth packet length mismatch")
        absence = deserialize_proof(body[pos + 2:end])
        if not isinstance(presence, PresenceProof) or not isinstance(absence, AbsenceProof):
            raise ProtocolError("auth packet proofs have the wrong types")
        return cls(cert, cert_index, presence, height, absence)

    def size_breakdown(self) -> dict:
        """Serialized size by part; framing is the tag plus index/length fields."""
        pres = len(serialize_proof(self.presence))
        absn = len(serialize_proof(self.absence))
        parts = {
            "certificate": 240,
            "presence": pres,
            "absence": absn,
            "framing": 1 + 4 + 4 + 2 + 2,
        }
        parts["total"] = sum(parts.values())
        return parts


_CODEC = {
    TAG_CERTIFICATE: Certificate,
    TAG_WARRANT: Warrant,
    TAG_REVOCATION_ORDER: RevocationOrder,
    TAG_REVOCATION: RevocationMessage,
    TAG_UPDATE_REQUEST: UpdateRequest,
    TAG_REGISTRATION_REQUEST: RegistrationRequest,
    TAG_BEACON: BeaconMessage,
    TAG_ALERT: AlertMessage,
    TAG_DISCLOSURE: DisclosureMessage,
    TAG_AUTH_PACKET: AuthPacket,
}
_TAG_OF = {cls: tag for tag, cls in _CODEC.items()}


def encode_message(msg) -> bytes:
    tag = _TAG_OF.get(type(msg))
    if tag is None:
        raise ProtocolError(f"{type(msg).__name__} is not a wire message")
    return bytes([tag]) + msg.pack()


def decode_message(data: bytes):
    if not data:
        raise ProtocolError("empty message")
    cls = _CODEC.get(data[0])
    if cls is None:
        raise ProtocolError(f"unknown message tag 0x{data[0]:02x}")
    return cls.unpack(data[1:])


def describe_record(data: bytes) -> str:
    """Human-readable field dump of one wire message (debugging aid)."""
    msg = decode_message(data)
    lines = [type(msg).__name__]
    for name in msg.__dataclass_fields__:
        value = getattr(msg, name)
        if isinstance(value, bytes):
            shown = value.hex() if len(value) <= 32 else value[:16].hex() + f"...({len(value)}B)"
        elif isinstance(value, (PresenceProof, AbsenceProof)):
            shown = f"{type(value).__name__}({len(serialize_proof(value))}B)"
        elif isinstance(value, Certificate):
            shown = f"Certificate(pu_vehicle={value.pu_vehicle.hex()[:16]}...)"
        else:
            shown = repr(value)
        lines.append(f"  {name} = {shown}")
    return "\n".join(lines)


# --- actors -------------------------------------------------------------------


@dataclass
class KeyEpisode:
    pu: bytes
    issued_ms: int
    revoked_ms: Optional[int] = None


@dataclass
class IdentityRecord:
    """LEA-private link between a real identity and its pseudonym history.

    Never serialized; deliberately has no pack() and no codec tag.
    """

    real_identity: bytes
    key_history: list = field(default_factory=list)  # list[KeyEpisode]

    def current(self) -> KeyEpisode:
        return self.key_history[-1]


class LawEnforcementAuthority:
    """Registration, key updates, revocation orders, and event judgment."""

    def __init__(
        self,
        seed: bytes,
        *,
        proof_validator: Optional[Callable[[bytes, bytes], bool]] = None,
        cert_validity_ms: int = DEFAULT_CERT_VALIDITY_MS,
        alpha: float = reputation.DEFAULT_ALPHA,
        beta: float = reputation.DEFAULT_BETA,
        avg_density: float = reputation.AVERAGE_DENSITY,
        judgment_error_rate: float = 0.0,
    ):
        if not 0.0 <= judgment_error_rate <= 1.0:
            raise ValueError("judgment_error_rate must be within [0, 1]")
        self._sign_key = keygen(sha256(b"lea-sign" + seed))
        self._enc_key = enc_keygen(sha256(b"lea-enc" + seed))
        self.cert_validity_ms = cert_validity_ms
        self.alpha = alpha
        self.beta = beta
        self.avg_density = avg_density
        self.judgment_error_rate = judgment_error_rate
        self._judgment_rng = Random(sha256(b"lea-judgment" + seed))
        self._proof_validator = proof_validator or (lambda identity, proof: True)
        self._identities: dict[bytes, IdentityRecord] = {}
        self._owner: dict[bytes, bytes] = {}  # any key ever issued -> identity
        self._scores: dict[bytes, ReputationRecord] = {}  # identity -> live record

    @property
    def public_key(self) -> bytes:
        return self._sign_key.public

    @property
    def enc_public(self) -> bytes:
        return self._enc_key.public

    def _warrant(self, subject_pu: bytes, score: float, expiry_ms: int) -> Warrant:
        sig = sign(self._sign_key.private, certificate_payload(subject_pu, score, expiry_ms))
        return Warrant(subject_pu, score, expiry_ms, sig)

    def _decrypt(self, ciphertext: bytes):
        try:
            return decode_message(decrypt(self._enc_key.private, ciphertext))
        except ValueError as exc:
            raise ProtocolError("request does not decrypt") from exc

    def handle_registration(self, ciphertext: bytes, now_ms: int) -> Warrant:
        req = self._decrypt(ciphertext)
        if not isinstance(req, RegistrationRequest):
            raise ProtocolError("expected a registration request")
        if not self._proof_validator(req.identity, req.identity_proof):
            raise ProtocolError("identity proof rejected")
        if req.initial_pu in self._owner:
            raise ProtocolError("public key already registered")
        if req.identity in self._identities:
            raise ProtocolError("identity already registered")
        record = IdentityRecord(req.identity, [KeyEpisode(req.initial_pu, now_ms)])
        self._identities[req.identity] = record
        self._owner[req.initial_pu] = req.identity
        self._scores[req.identity] = ReputationRecord(owner=req.initial_pu)
        return self._warrant(req.initial_pu, INITIAL_SCORE, now_ms + self.cert_validity_ms)

    def handle_update(self, ciphertext: bytes, now_ms: int) -> tuple[Warrant, RevocationOrder]:
        """Validate a key rotation; returns the warrant for the new key and the
        revocation order for the old one."""
        req = self._decrypt(ciphertext)
        if not isinstance(req, UpdateRequest):
            raise ProtocolError("expected an update request")
        if not verify(req.current_pu, req.signed_payload(), req.sig):
            raise ProtocolError("update signature invalid")
        identity = self._owner.get(req.current_pu)
        if identity is None:
            raise ProtocolError("unknown current key")
        record = self._identities[identity]
        episode = next(e for e in record.key_history if e.pu == req.current_pu)
        if episode.revoked_ms is not None:
            raise ProtocolError("current key already revoked")
        if episode is not record.current():
            raise ProtocolError("current key already superseded")
        if req.new_pu in self._owner:
            raise ProtocolError("new key already registered")
        order = self.order_revocation(req.current_pu, now_ms)
        record.key_history.append(KeyEpisode(req.new_pu, now_ms))
        self._owner[req.new_pu] = identity
        score = self._scores[identity]
        score.owner = req.new_pu
        warrant = self._warrant(req.new_pu, score.score, now_ms + self.cert_validity_ms)
        return warrant, order

    def order_revocation(self, pu_rev: bytes, t_rev_ms: int, reason: str = "") -> RevocationOrder:
        identity = self._owner.get(pu_rev)
        if identity is None:
            raise ProtocolError("cannot revoke an unknown key")
        episode = next(e for e in self._identities[identity].key_history if e.pu == pu_rev)
        if episode.revoked_ms is not None:
            raise ProtocolError("key already revoked")
        episode.revoked_ms = t_rev_ms
        sig = sign(self._sign_key.private, revocation_payload(pu_rev, t_rev_ms))
        return RevocationOrder(pu_rev, t_rev_ms, sig)

    def lookup_identity(self, pu: bytes) -> bytes:
        """Trace any key ever issued back to its real identity (LEA-only power)."""
        identity = self._owner.get(pu)
        if identity is None:
            raise ProtocolError("key was never issued")
        return identity

    def live_score(self, pu: bytes) -> float:
        return self._scores[self.lookup_identity(pu)].score

    def score_record(self, pu: bytes) -> ReputationRecord:
        return self._scores[self.lookup_identity(pu)]

    def judge(self, alerts, disclosures, density: float, ground_truth: str,
              time_ms: int) -> list[ScoreChange]:
        """Apply one event's reward/penalty updates to the live scores.

        The verdict equals the supplied ground truth except when a nonzero
        judgment_error_rate flips it (seeded, for robustness experiments).
        """
        view: dict[bytes, ReputationRecord] = {}
        for msg in list(alerts) + list(disclosures):
            identity = self._owner.get(msg.sender_pu)
            if identity is None:
                raise UnknownParticipantError(msg.sender_pu.hex())
            view[msg.sender_pu] = self._scores[identity]
        verdict = ground_truth
        if self.judgment_error_rate and self._judgment_rng.random() < self.judgment_error_rate:
            verdict = (reputation.FORGED if ground_truth == reputation.AUTHENTIC
                       else reputation.AUTHENTIC)
        ctx = reputation.EventContext.for_event(alerts, disclosures, density,
                                                self.avg_density)
        return reputation.judge_event(alerts, disclosures, ctx, verdict, view,
                                      alpha=self.alpha, beta=self.beta, time_ms=time_ms)


class CertificateAuthority:
    """Issues certificates from warrants and countersigns revocations.

    Keeps the complete transcript of everything it was ever sent, so tests can
    audit that no input links identities or successive keys.
    """

    def __init__(self, seed: bytes, lea_public: bytes):
        self._sign_key = keygen(sha256(b"ca-sign" + seed))
        self.lea_public = lea_public
        self.transcript: list[tuple[str, bytes]] = []
        self._network: Optional["TrustNetwork"] = None

    @property
    def public_key(self) -> bytes:
        return self._sign_key.public

    def join(self, network: "TrustNetwork") -> None:
        self._network = network

    def issue_certificate(self, warrant: Warrant) -> Certificate:
        self.transcript.append(("warrant", encode_message(warrant)))
        payload = certificate_payload(warrant.subject_pu, warrant.reputation,
                                      warrant.expiry_ms)
        if not verify(self.lea_public, payload, warrant.sig_lea):
            raise ProtocolError("warrant signature invalid")
        cert = Certificate(
            pu_ca=self.public_key,
            sig_ca=sign(self._sign_key.private, payload),
            pu_lea=self.lea_public,
            sig_lea=warrant.sig_lea,
            pu_vehicle=warrant.subject_pu,
            reputation=warrant.reputation,
            expiry_ms=warrant.expiry_ms,
        )
        if self._network is not None:
            self._network.submit_certificate(cert)
        return cert

    def countersign_revocation(self, order: RevocationOrder) -> RevocationMessage:
        self.transcript.append(("revocation_order", encode_message(order)))
        payload = revocation_payload(order.subject_pu, order.t_rev_ms)
        if not verify(self.lea_public, payload, order.sig_lea):
            raise ProtocolError("revocation order signature invalid")
        rev = RevocationMessage(
            pu_ca=self.public_key,
            sig_ca=sign(self._sign_key.private, payload),
            pu_lea=self.lea_public,
            sig_lea=order.sig_lea,
            pu_rev=order.subject_pu,
            t_rev_ms=order.t_rev_ms,
        )
        if self._network is not None:
            self._network.submit_revocation(rev)
        return rev


class Vehicle:
    """Key lifecycle and message signing for one simulated vehicle.

    All key material and encryption randomness derive from the constructor
    seed, so a run replays byte-identically.
    """

    def __init__(self, name: str, seed: bytes):
        self.name = name
        self.identity = b"id:" + name.encode()
        self._seed = seed
        self._key_seq = 0
        self.keypair = keygen(self._key_seed(0))
        self.key_history: list[bytes] = [self.keypair.public]
        self.certificate: Optional[Certificate] = None
        self.cert_index: Optional[int] = None
        self._staged = None  # keypair awaiting its certificate
        self._eph_counter = 0

    def _key_seed(self, n: int) -> bytes:
        return sha256(self._seed + b"key" + n.to_bytes(4, "big"))

    def _eph_seed(self) -> bytes:
        self._eph_counter += 1
        return sha256(self._seed + b"eph" + self._eph_counter.to_bytes(4, "big"))

    @property
    def public_key(self) -> bytes:
        return self.keypair.public

    def registration_request(self, lea_enc_public: bytes,
                             identity_proof: bytes = b"proof") -> bytes:
        req = RegistrationRequest(self.identity, self.public_key, identity_proof)
        return encrypt(lea_enc_public, encode_message(req), self._eph_seed())

    def update_request(self, lea_enc_public: bytes,
                       identity_proof: bytes = b"") -> bytes:
        """Stage the next keypair and produce the encrypted rotation request."""
        nxt = keygen(self._key_seed(self._key_seq + 1))
        self._staged = nxt
        body = (b"update" + self.public_key + nxt.public
                + struct.pack(">H", len(identity_proof)) + identity_proof)
        req = UpdateRequest(self.public_key, nxt.public, identity_proof,
                            sign(self.keypair.private, body))
        return encrypt(lea_enc_public, encode_message(req), self._eph_seed())

    def adopt_certificate(self, cert: Certificate) -> None:
        if self._staged is not None and cert.pu_vehicle == self._staged.public:
            self.keypair = self._staged
            self._staged = None
            self._key_seq += 1
            self.key_history.append(self.keypair.public)
        elif cert.pu_vehicle != self.public_key:
            raise ProtocolError("certificate is for a different key")
        self.certificate = cert
        self.cert_index = None

    def make_beacon(self, now_ms: int, position_km: float) -> BeaconMessage:
        payload = b"beacon" + self.public_key + struct.pack(">Qd", now_ms, position_km)
        return BeaconMessage(self.public_key, now_ms, position_km,
                             sign(self.keypair.private, payload))

    def make_alert(self, now_ms: int, event_id: int, level: int,
                   position_km: float) -> AlertMessage:
        payload = b"alert" + self.public_key + struct.pack(
            ">QIBd", now_ms, event_id, level, position_km)
        return AlertMessage(self.public_key, now_ms, event_id, level, position_km,
                            sign(self.keypair.private, payload))

    def make_disclosure(self, now_ms: int, event_id: int, accused_pu: bytes,
                        claim: int = CLAIM_FORGED) -> DisclosureMessage:
        payload = (b"disc" + self.public_key + struct.pack(">QI", now_ms, event_id)
                   + accused_pu + struct.pack(">B", claim))
        return DisclosureMessage(self.public_key, now_ms, event_id, accused_pu,
                                 claim, sign(self.keypair.private, payload))


def make_record_validator(ca_public: bytes, lea_public: bytes):
    """Record validity rule shared by every RSU: right type per chain, pinned
    authority keys, and all signatures verify."""

    def validate(chain_id: int, record: bytes) -> None:
        msg = decode_message(record)
        if chain_id == CHAIN_CERT:
            if not isinstance(msg, Certificate):
                raise ProtocolError("CerBC records must be certificates")
            if msg.pu_ca != ca_public or msg.pu_lea != lea_public:
                raise ProtocolError("certificate names an unknown authority")
            payload = msg.signed_payload()
            if not verify(msg.pu_ca, payload, msg.sig_ca):
                raise ProtocolError("certificate CA signature invalid")
            if not verify(msg.pu_lea, payload, msg.sig_lea):
                raise ProtocolError("certificate LEA signature invalid")
        elif chain_id == CHAIN_REV:
            if not isinstance(msg, RevocationMessage):
                raise ProtocolError("RevBC records must be revocation messages")
            if msg.pu_ca != ca_public or msg.pu_lea != lea_public:
                raise ProtocolError("revocation names an unknown authority")
            payload = msg.signed_payload()
            if not verify(msg.pu_ca, payload, msg.sig_ca):
                raise ProtocolError("revocation CA signature invalid")
            if not verify(msg.pu_lea, payload, msg.sig_lea):
                raise ProtocolError("revocation LEA signature invalid")
        elif chain_id == CHAIN_MSG:
            if not isinstance(msg, (BeaconMessage, AlertMessage, DisclosureMessage)):
                raise ProtocolError("MesBC records must be broadcast messages")
            if not verify(msg.sender_pu, msg.signed_payload(), msg.sig):
                raise ProtocolError("broadcast signature invalid")
        else:
            raise ProtocolError(f"unknown chain id {chain_id}")

    return validate


def extract_revoked_key(record: bytes) -> tuple[bytes, int]:
    msg = decode_message(record)
    if not isinstance(msg, RevocationMessage):
        raise ProtocolError("not a revocation record")
    return msg.pu_rev, msg.t_rev_ms


class RoadsideUnit:
    """Validates records and votes on candidate blocks."""

    def __init__(self, name: str, ca_public: bytes, lea_public: bytes):
        self.name = name
        self._validate = make_record_validator(ca_public, lea_public)

    def validate_record(self, chain_id: int, record: bytes) -> bool:
        try:
            self._validate(chain_id, record)
            return True
        except ProtocolError:
            return False

    def vote(self, chain: Chain, block) -> bool:
        try:
            check_block(chain, block)
            return True
        except (ledger.BlockRejected, ledger.RecordRejected):
            return False


class TrustNetwork:
    """The shared infrastructure: three chains, the RSU set, and the pending
    record queues that get sealed into blocks once per interval."""

    def __init__(
        self,
        ca_public: bytes,
        lea_public: bytes,
        *,
        difficulty: int = ledger.DEFAULT_DIFFICULTY,
        expiry_window_ms: int = ledger.DEFAULT_EXPIRY_WINDOW_MS,
        rsu_count: int = 3,
    ):
        if rsu_count < 1:
            raise ValueError("need at least one RSU")
        validator = make_record_validator(ca_public, lea_public)
        self.cerbc = Chain(CHAIN_CERT, difficulty=difficulty,
                           expiry_window_ms=expiry_window_ms, record_validator=validator)
        self.revbc = Chain(CHAIN_REV, difficulty=difficulty,
                           expiry_window_ms=expiry_window_ms, record_validator=validator,
                           rev_key_extractor=extract_revoked_key)
        self.mesbc = Chain(CHAIN_MSG, difficulty=difficulty,
                           expiry_window_ms=expiry_window_ms, record_validator=validator)
        self.rsus = [RoadsideUnit(f"rsu-{i}", ca_public, lea_public)
                     for i in range(rsu_count)]
        self._pending: dict[int, list[bytes]] = {CHAIN_CERT: [], CHAIN_REV: [], CHAIN_MSG: []}
        self._locator: dict[bytes, tuple[int, Certificate]] = {}

    def chains(self) -> tuple[Chain, Chain, Chain]:
        return self.cerbc, self.revbc, self.mesbc

    def submit_certificate(self, cert: Certificate) -> None:
        self._pending[CHAIN_CERT].append(encode_message(cert))

    def submit_revocation(self, rev: RevocationMessage) -> None:
        self._pending[CHAIN_REV].append(encode_message(rev))

    def submit_broadcast(self, msg) -> None:
        if not isinstance(msg, (BeaconMessage, AlertMessage, DisclosureMessage)):
            raise ProtocolError("only broadcast messages are recorded in MesBC")
        self._pending[CHAIN_MSG].append(encode_message(msg))

    def pending_count(self, chain_id: int) -> int:
        return len(self._pending[chain_id])

    def pending_records(self, chain_id: int) -> tuple:
        return tuple(self._pending[chain_id])

    def seal(self, now_ms: int):
        """Mine one block per chain (possibly empty) and commit those the RSU
        quorum accepts. Headers are produced every interval regardless of
        traffic, which is what the fixed yearly header overhead assumes."""
        appended = []
        for chain in self.chains():
            records = self._pending[chain.chain_id]
            block = mine_block(chain, records, now_ms)
            votes = [rsu.vote(chain, block) for rsu in self.rsus]
            if not quorum_accept(votes):
                raise ProtocolError(f"{chain.name} block rejected by the RSU quorum")
            start = len(chain.state) if chain.chain_id == CHAIN_CERT else 0
            ledger.append_block(chain, block)
            if chain.chain_id == CHAIN_CERT:
                for offset, record in enumerate(block.records):
                    cert = decode_message(record)
                    self._locator[cert.pu_vehicle] = (start + offset, cert)
            self._pending[chain.chain_id] = []
            appended.append(block)
        return appended

    def cert_location(self, pu: bytes) -> Optional[tuple[int, Certificate]]:
        return self._locator.get(pu)

    @property
    def cerbc_root(self) -> bytes:
        return self.cerbc.state_root

    @property
    def revbc_root(self) -> bytes:
        return self.revbc.state_root

    def revoked(self, pu: bytes) -> bool:
        return pu in self.revbc.state

    def auth_packet_for(self, vehicle: Vehicle) -> AuthPacket:
        loc = self.cert_location(vehicle.public_key)
        if loc is not None:
            vehicle.cert_index = loc[0]
        return build_auth_packet(vehicle, self.cerbc, self.revbc,
                                 revbc_height=self.revbc.height)


# --- top-level flows ----------------------------------------------------------


def register(lea: LawEnforcementAuthority, ca: CertificateAuthority, identity: bytes,
             initial_pu: bytes, *, identity_proof: bytes = b"proof",
             now_ms: int = 0) -> Certificate:
    """Enrol a fresh identity/key and issue its first certificate."""
    req = RegistrationRequest(identity, initial_pu, identity_proof)
    seed = sha256(b"reg-eph" + identity + initial_pu)
    ciphertext = encrypt(lea.enc_public, encode_message(req), seed)
    warrant = lea.handle_registration(ciphertext, now_ms)
    return ca.issue_certificate(warrant)


def register_vehicle(lea: LawEnforcementAuthority, ca: CertificateAuthority,
                     vehicle: Vehicle, *, identity_proof: bytes = b"proof",
                     now_ms: int = 0) -> Certificate:
    ciphertext = vehicle.registration_request(lea.enc_public, identity_proof)
    warrant = lea.handle_registration(ciphertext, now_ms)
    cert = ca.issue_certificate(warrant)
    vehicle.adopt_certificate(cert)
    return cert


def update_certificate(lea: LawEnforcementAuthority, ca: CertificateAuthority,
                       req_ciphertext: bytes, *, now_ms: int) -> Certificate:
    """Process an encrypted key rotation: new certificate, old key revoked."""
    warrant, order = lea.handle_update(req_ciphertext, now_ms)
    cert = ca.issue_certificate(warrant)
    ca.countersign_revocation(order)
    return cert


def revoke_key(lea: LawEnforcementAuthority, ca: CertificateAuthority, pu_rev: bytes,
               t_rev_ms: int, reason: str = "") -> RevocationMessage:
    order = lea.order_revocation(pu_rev, t_rev_ms, reason)
    return ca.countersign_revocation(order)


def build_auth_packet(vehicle: Vehicle, cerbc_state, revbc_state, *,
                      revbc_height: int = 0) -> AuthPacket:
    """Assemble the packet a verifier can check against the committed roots.

    Raises ProtocolError if the certificate is missing from CerBC and
    MerkleError if the key is present in RevBC (revoked keys cannot prove
    absence)."""
    tree: AppendTree = cerbc_state.state if isinstance(cerbc_state, Chain) else cerbc_state
    lex: LexTree = revbc_state.state if isinstance(revbc_state, Chain) else revbc_state
    if isinstance(revbc_state, Chain) and revbc_height == 0:
        revbc_height = revbc_state.height
    cert = vehicle.certificate
    if cert is None:
        raise ProtocolError("vehicle holds no certificate")
    leaf = leaf_digest(encode_message(cert))
    index = vehicle.cert_index
    if index is None or not (0 <= index < len(tree)) or tree.leaf_digest_at(index) != leaf:
        index = next((i for i in range(len(tree)) if tree.leaf_digest_at(i) == leaf), None)
        if index is None:
            raise ProtocolError("certificate is not recorded in CerBC")
        vehicle.cert_index = index
    presence = tree.prove_presence(index)
    absence = lex.prove_absence(cert.pu_vehicle)
    return AuthPacket(cert, index, presence, revbc_height, absence)


@dataclass(frozen=True)
class AuthResult:
    accepted: bool
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.accepted


ACCEPT = AuthResult(True)


def authenticate(packet: AuthPacket, cerbc_root: bytes, revbc_root: bytes,
                 now_ms: int) -> AuthResult:
    """Verifier-side check; names the first failed step on rejection.

    Order: certificate expiry, CA signature, LEA signature, presence of the
    certificate in CerBC, absence of the key from RevBC.
    """
    cert = packet.certificate
    if now_ms >= cert.expiry_ms:
        return AuthResult(False, REJECT_EXPIRED)
    payload = cert.signed_payload()
    if not verify(cert.pu_ca, payload, cert.sig_ca):
        return AuthResult(False, REJECT_CA_SIG)
    if not verify(cert.pu_lea, payload, cert.sig_lea):
        return AuthResult(False, REJECT_LEA_SIG)
    if not verify_presence(cerbc_root, encode_message(cert), packet.presence):
        return AuthResult(False, REJECT_PRESENCE)
    if not verify_absence(revbc_root, cert.pu_vehicle, packet.absence):
        return AuthResult(False, REJECT_ABSENCE)
    return ACCEPT


def verify_broadcast(msg, packet: AuthPacket, cerbc_root: bytes, revbc_root: bytes,
                     now_ms: int, *, freshness_ms: int = FRESHNESS_WINDOW_MS) -> AuthResult:
    """Receiver-side check of a signed broadcast plus its sender's packet.

    Accepted messages are what RSUs queue for MesBC recording.
    """
    result = authenticate(packet, cerbc_root, revbc_root, now_ms)
    if not result:
        return result
    if abs(now_ms - msg.timestamp_ms) > freshness_ms:
        return AuthResult(False, REJECT_STALE)
    if msg.sender_pu != packet.certificate.pu_vehicle:
        return AuthResult(False, REJECT_KEY_MISMATCH)
    if not verify(msg.sender_pu, msg.signed_payload(), msg.sig):
        return AuthResult(False, REJECT_SIGNATURE)
    return ACCEPT
