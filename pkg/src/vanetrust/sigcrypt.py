"""Deterministic cryptographic primitives: hashing, key pairs, signatures,
and the hybrid encryption used for confidential requests.

Signing is Ed25519 (32-byte public keys, 64-byte signatures, deterministic
per RFC 8032; reproducible simulations depend on it). Key generation takes
an explicit 32-byte seed so the same seed always yields the same pair;
production entropy handling is out of scope. Encryption is X25519 +
HKDF-SHA256 + ChaCha20-Poly1305 with a one-shot ephemeral key, so a fixed
zero nonce is safe.
"""

from __future__ import annotations

from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from vanetrust import kernel

DIGEST_LEN = 32
SEED_LEN = 32
PUBLIC_KEY_LEN = 32
SIGNATURE_LEN = 64

_AEAD_NONCE = bytes(12)
_KDF_INFO = b"vanetrust-hybrid-v1"


def sha256(data: bytes) -> bytes:
    """SHA-256 digest (32 bytes)."""
    return kernel.sha256(data)


@dataclass(frozen=True)
class KeyPair:
    """Ed25519 signing key pair; `private` is the 32-byte seed."""

    public: bytes
    private: bytes


def keygen(seed: bytes) -> KeyPair:
    """Derive an Ed25519 key pair from a 32-byte seed. Same seed, same pair."""
    if len(seed) != SEED_LEN:
        raise ValueError(f"seed must be {SEED_LEN} bytes, got {len(seed)}")
    private = Ed25519PrivateKey.from_private_bytes(seed)
    return KeyPair(public=private.public_key().public_bytes_raw(), private=seed)


def sign(private: bytes, msg: bytes) -> bytes:
    """Sign msg with an Ed25519 private seed; returns a 64-byte signature."""
    return Ed25519PrivateKey.from_private_bytes(private).sign(msg)


def verify(public: bytes, msg: bytes, sig: bytes) -> bool:
    """True iff sig is a valid signature of msg under public.

    Malformed keys or signatures verify as False, never raise.
    """
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(sig, msg)
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


@dataclass(frozen=True)
class EncKeyPair:
    """X25519 key pair for receiving encrypted requests."""

    public: bytes
    private: bytes


def enc_keygen(seed: bytes) -> EncKeyPair:
    if len(seed) != SEED_LEN:
        raise ValueError(f"seed must be {SEED_LEN} bytes, got {len(seed)}")
    private = X25519PrivateKey.from_private_bytes(seed)
    return EncKeyPair(public=private.public_key().public_bytes_raw(), private=seed)


def _session_key(shared: bytes) -> bytes:
    return HKDF(algorithm=SHA256(), length=32, salt=None, info=_KDF_INFO).derive(shared)


def encrypt(recipient_public: bytes, plaintext: bytes, ephemeral_seed: bytes) -> bytes:
    """Hybrid-encrypt plaintext to an X25519 public key.

    ephemeral_seed (32 bytes) makes the ciphertext deterministic for replayable
    simulations; each seed must be used once. Output: ephemeral public key (32)
    followed by the AEAD ciphertext.
    """
    if len(ephemeral_seed) != SEED_LEN:
        raise ValueError("ephemeral seed must be 32 bytes")
    eph = X25519PrivateKey.from_private_bytes(ephemeral_seed)
    shared = eph.exchange(X25519PublicKey.from_public_bytes(recipient_public))
    sealed = ChaCha20Poly1305(_session_key(shared)).encrypt(_AEAD_NONCE, plaintext, None)
    return eph.public_key().public_bytes_raw() + sealed


def decrypt(recipient_private: bytes, ciphertext: bytes) -> bytes:
    """Open a ciphertext produced by encrypt. Raises ValueError on any failure."""
    if len(ciphertext) < PUBLIC_KEY_LEN + 16:
        raise ValueError("ciphertext too short")
    eph_public = ciphertext[:PUBLIC_KEY_LEN]
    private = X25519PrivateKey.from_private_bytes(recipient_private)
    try:
        shared = private.exchange(X25519PublicKey.from_public_bytes(eph_public))
        return ChaCha20Poly1305(_session_key(shared)).decrypt(
            _AEAD_NONCE, ciphertext[PUBLIC_KEY_LEN:], None
        )
    except Exception as exc:
        raise ValueError("decryption failed") from exc
