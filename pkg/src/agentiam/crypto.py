"""Hashing and signing primitives.

One hash (SHA3-256) and one signature scheme (Ed25519, labelled "EdDSA" on
the wire) are used everywhere.  Signatures always cover canonical bytes, so
callers never sign ad-hoc encodings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .canonical import canonical_bytes
from .errors import InvalidInputError

__all__ = ["ALGORITHM", "KeyPair", "sha3_256", "hash_value", "sign", "verify"]

ALGORITHM = "EdDSA"

# Domain separator so identity keys cannot collide with other seed uses.
_KEY_DERIVATION_TAG = b"agentiam/ed25519-key/v1:"


def sha3_256(payload: bytes) -> bytes:
    """32-byte SHA3-256 digest."""
    return hashlib.sha3_256(payload).digest()


def hash_value(value: Any) -> bytes:
    """Digest of a value's canonical serialization."""
    return sha3_256(canonical_bytes(value))


@dataclass(frozen=True)
class KeyPair:
    """An Ed25519 keypair named by ``keyId`` ("<did>#<name>").

    The private half never appears in any document serialization; only the
    workspace key store may call ``private_bytes`` explicitly.
    """

    key_id: str
    public_key: bytes
    _private_key: bytes
    algorithm: str = ALGORITHM

    @classmethod
    def from_seed(cls, seed: bytes, key_id: str) -> "KeyPair":
        """Derive a keypair deterministically from ``seed``."""
        if not seed:
            raise InvalidInputError("seed must be non-empty")
        raw = sha3_256(_KEY_DERIVATION_TAG + seed)
        return cls.from_private_bytes(raw, key_id)

    @classmethod
    def from_private_bytes(cls, raw: bytes, key_id: str) -> "KeyPair":
        if len(raw) != 32:
            raise InvalidInputError("private key must be 32 bytes")
        private = Ed25519PrivateKey.from_private_bytes(raw)
        public = private.public_key().public_bytes_raw()
        return cls(key_id=key_id, public_key=public, _private_key=raw)

    def private_bytes(self) -> bytes:
        """Raw private key, for the workspace key store only."""
        return self._private_key

    def sign(self, payload: bytes) -> bytes:
        return sign(self._private_key, payload)

    def __repr__(self) -> str:  # keep secrets out of logs and tracebacks
        return f"KeyPair(key_id={self.key_id!r}, public_key={self.public_key.hex()})"


def sign(private_key: bytes, payload: bytes) -> bytes:
    """64-byte Ed25519 signature over ``payload``."""
    return Ed25519PrivateKey.from_private_bytes(private_key).sign(payload)


def verify(public_key: bytes, payload: bytes, signature: bytes) -> bool:
    """True iff ``signature`` is valid for ``payload`` under ``public_key``."""
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, payload)
        return True
    except (InvalidSignature, ValueError):
        return False
