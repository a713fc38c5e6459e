"""Agent identities: DIDs, documents, and their lifecycle.

A DID is derived from the agent's initial verification key, so identity
creation needs no registry round-trip and two distinct keys can never mint
the same identifier.  Documents carry the agent's declared behaviour scope
and toolset so that enforcement points can hold the agent to what it
registered as, not what it claims at request time.
"""

from __future__ import annotations

import base64
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, Mapping, Optional

from .canonical import canonical_bytes, from_hex, to_hex
from .crypto import ALGORITHM, KeyPair, sha3_256, verify as verify_raw
from .errors import (
    InvalidInputError,
    KeyNotFoundError,
    LifecycleViolationError,
    ResolutionFailureError,
    UnauthorizedError,
    VerificationRefusedError,
)

__all__ = [
    "DID_METHOD",
    "AgentDid",
    "LifecycleStatus",
    "VerificationMethod",
    "ServiceEndpoint",
    "ToolGrant",
    "CapabilityProfile",
    "DidDocument",
    "DidResolver",
    "generate_identity",
    "sign_payload",
    "verify_payload",
    "update_document",
    "deactivate",
]

DID_METHOD = "agentlab"

_IDENTIFIER_RE = re.compile(r"^[a-z2-7]{52}$")
_FOREIGN_IDENTIFIER_RE = re.compile(r"^[A-Za-z0-9:._-]+$")
_METHOD_RE = re.compile(r"^[a-z0-9]+$")


@dataclass(frozen=True, order=True)
class AgentDid:
    """A decentralized identifier, rendered as ``did:<method>:<identifier>``."""

    method: str
    identifier: str

    @classmethod
    def from_public_key(cls, public_key: bytes, method: str = DID_METHOD) -> "AgentDid":
        digest = sha3_256(public_key)
        encoded = base64.b32encode(digest).decode("ascii").rstrip("=").lower()
        return cls(method=method, identifier=encoded)

    @classmethod
    def parse(cls, text: str) -> "AgentDid":
        parts = text.split(":", 2)
        if len(parts) != 3 or parts[0] != "did":
            raise InvalidInputError(f"not a DID: {text!r}")
        method, identifier = parts[1], parts[2]
        if not _METHOD_RE.match(method):
            raise InvalidInputError(f"bad DID method: {method!r}")
        if method == DID_METHOD:
            if not _IDENTIFIER_RE.match(identifier):
                raise InvalidInputError(f"bad {DID_METHOD} identifier: {identifier!r}")
        elif not _FOREIGN_IDENTIFIER_RE.match(identifier):
            raise InvalidInputError(f"bad DID identifier: {identifier!r}")
        return cls(method=method, identifier=identifier)

    def render(self) -> str:
        return f"did:{self.method}:{self.identifier}"

    def __str__(self) -> str:
        return self.render()


class LifecycleStatus(str, Enum):
    ACTIVE = "active"
    SUSPENDED = "suspended"
    REVOKED = "revoked"
    ARCHIVED = "archived"


# Permitted transitions; revocation is terminal except for archival and
# nothing leaves the archive.
_TRANSITIONS: frozenset[tuple[LifecycleStatus, LifecycleStatus]] = frozenset(
    {
        (LifecycleStatus.ACTIVE, LifecycleStatus.SUSPENDED),
        (LifecycleStatus.SUSPENDED, LifecycleStatus.ACTIVE),
        (LifecycleStatus.ACTIVE, LifecycleStatus.REVOKED),
        (LifecycleStatus.ACTIVE, LifecycleStatus.ARCHIVED),
        (LifecycleStatus.SUSPENDED, LifecycleStatus.ARCHIVED),
        (LifecycleStatus.REVOKED, LifecycleStatus.ARCHIVED),
    }
)


def permitted_transitions() -> frozenset[tuple[LifecycleStatus, LifecycleStatus]]:
    return _TRANSITIONS


@dataclass(frozen=True)
class VerificationMethod:
    key_id: str
    public_key: bytes
    algorithm: str = ALGORITHM

    def to_value(self) -> dict[str, Any]:
        return {
            "keyId": self.key_id,
            "algorithm": self.algorithm,
            "publicKey": to_hex(self.public_key),
        }

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "VerificationMethod":
        return cls(
            key_id=value["keyId"],
            algorithm=value["algorithm"],
            public_key=from_hex(value["publicKey"]),
        )


@dataclass(frozen=True)
class ServiceEndpoint:
    name: str
    endpoint: str

    def to_value(self) -> dict[str, Any]:
        return {"name": self.name, "endpoint": self.endpoint}

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "ServiceEndpoint":
        return cls(name=value["name"], endpoint=value["endpoint"])


@dataclass(frozen=True)
class ToolGrant:
    """One tool the agent is allowed to wield, with its permitted targets."""

    tool_name: str
    target_resources: tuple[str, ...]
    tool_did: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "target_resources", tuple(sorted(self.target_resources)))

    def to_value(self) -> dict[str, Any]:
        value: dict[str, Any] = {
            "toolName": self.tool_name,
            "targetResources": list(self.target_resources),
        }
        if self.tool_did is not None:
            value["toolDid"] = self.tool_did
        return value

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "ToolGrant":
        return cls(
            tool_name=value["toolName"],
            target_resources=tuple(value["targetResources"]),
            tool_did=value.get("toolDid"),
        )


@dataclass(frozen=True)
class CapabilityProfile:
    """Everything an identity declares about itself at creation time."""

    scope_of_behavior: tuple[str, ...] = ()
    toolset: tuple[ToolGrant, ...] = ()
    service_endpoints: tuple[ServiceEndpoint, ...] = ()
    model_hash: bytes = b"\x00" * 32
    expiry: Optional[int] = None
    provenance: Optional[str] = None
    training_info: Optional[Mapping[str, Any]] = None


@dataclass(frozen=True)
class DidDocument:
    did: AgentDid
    controller: AgentDid
    verification_methods: tuple[VerificationMethod, ...]
    service_endpoints: tuple[ServiceEndpoint, ...]
    scope_of_behavior: tuple[str, ...]
    toolset: tuple[ToolGrant, ...]
    model_hash: bytes
    created: int
    updated: int
    lifecycle_status: LifecycleStatus = LifecycleStatus.ACTIVE
    expiry: Optional[int] = None
    provenance: Optional[str] = None
    training_info: Optional[Mapping[str, Any]] = None

    def method_for(self, key_id: str) -> VerificationMethod:
        for method in self.verification_methods:
            if method.key_id == key_id:
                return method
        raise KeyNotFoundError(f"keyId {key_id!r} not listed in {self.did}")

    def to_value(self) -> dict[str, Any]:
        value: dict[str, Any] = {
            "did": self.did.render(),
            "controller": self.controller.render(),
            "verificationMethod": [m.to_value() for m in self.verification_methods],
            "serviceEndpoints": [e.to_value() for e in self.service_endpoints],
            "scopeOfBehavior": list(self.scope_of_behavior),
            "toolset": [t.to_value() for t in self.toolset],
            "modelHash": to_hex(self.model_hash),
            "created": self.created,
            "updated": self.updated,
            "expiry": self.expiry,
            "lifecycleStatus": self.lifecycle_status.value,
            "provenance": self.provenance,
        }
        if self.training_info is not None:
            value["trainingInfo"] = dict(self.training_info)
        return value

    def canonical(self) -> bytes:
        return canonical_bytes(self.to_value())

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "DidDocument":
        return cls(
            did=AgentDid.parse(value["did"]),
            controller=AgentDid.parse(value["controller"]),
            verification_methods=tuple(
                VerificationMethod.from_value(v) for v in value["verificationMethod"]
            ),
            service_endpoints=tuple(
                ServiceEndpoint.from_value(v) for v in value["serviceEndpoints"]
            ),
            scope_of_behavior=tuple(value["scopeOfBehavior"]),
            toolset=tuple(ToolGrant.from_value(v) for v in value["toolset"]),
            model_hash=from_hex(value["modelHash"]),
            created=value["created"],
            updated=value["updated"],
            expiry=value.get("expiry"),
            lifecycle_status=LifecycleStatus(value["lifecycleStatus"]),
            provenance=value.get("provenance"),
            training_info=value.get("trainingInfo"),
        )


def generate_identity(
    seed: bytes,
    controller: Optional[AgentDid] = None,
    profile: Optional[CapabilityProfile] = None,
    now: int = 0,
) -> tuple[AgentDid, KeyPair, DidDocument]:
    """Mint a new identity deterministically from ``seed``.

    The DID binds the initial verification key; the controller defaults to
    the new identity itself (self-sovereign agents).
    """
    if not seed:
        raise InvalidInputError("seed must be non-empty")
    profile = profile or CapabilityProfile()
    key = KeyPair.from_seed(seed, key_id="")
    did = AgentDid.from_public_key(key.public_key)
    key = KeyPair.from_private_bytes(key.private_bytes(), key_id=f"{did}#key-1")
    document = DidDocument(
        did=did,
        controller=controller or did,
        verification_methods=(
            VerificationMethod(key_id=key.key_id, public_key=key.public_key),
        ),
        service_endpoints=tuple(profile.service_endpoints),
        scope_of_behavior=tuple(profile.scope_of_behavior),
        toolset=tuple(profile.toolset),
        model_hash=profile.model_hash,
        created=now,
        updated=now,
        expiry=profile.expiry,
        provenance=profile.provenance,
        training_info=profile.training_info,
    )
    return did, key, document


def sign_payload(key: KeyPair, payload: bytes) -> bytes:
    return key.sign(payload)


def verify_payload(
    document: DidDocument, key_id: str, payload: bytes, signature: bytes
) -> bool:
    """Check ``signature`` against a key listed in ``document``.

    Raises instead of returning False when the document is decommissioned
    (revoked or archived) or the key is unknown, so callers can distinguish
    refusal from forgery.
    """
    if document.lifecycle_status in (LifecycleStatus.REVOKED, LifecycleStatus.ARCHIVED):
        raise VerificationRefusedError(
            f"{document.did} is {document.lifecycle_status.value}; verification refused"
        )
    method = document.method_for(key_id)
    return verify_raw(method.public_key, payload, signature)


def _check_controller(document: DidDocument, controller_key: KeyPair) -> None:
    did_part, _, _ = controller_key.key_id.partition("#")
    if did_part != document.controller.render():
        raise UnauthorizedError(
            f"key {controller_key.key_id!r} does not speak for controller {document.controller}"
        )
    if document.controller == document.did:
        method = document.method_for(controller_key.key_id)
        if method.public_key != controller_key.public_key:
            raise UnauthorizedError(f"public key mismatch for {controller_key.key_id!r}")


def _check_transition(current: LifecycleStatus, target: LifecycleStatus) -> None:
    if (current, target) not in _TRANSITIONS:
        raise LifecycleViolationError(
            f"transition {current.value} -> {target.value} is not permitted"
        )


def update_document(
    document: DidDocument,
    changes: Mapping[str, Any],
    controller_key: KeyPair,
    now: int,
) -> DidDocument:
    """Apply controller-authorized ``changes`` and advance ``updated``.

    Recognized change keys: addVerificationMethod, serviceEndpoints,
    scopeOfBehavior, toolset, expiry, lifecycleStatus.
    """
    _check_controller(document, controller_key)
    if document.lifecycle_status in (LifecycleStatus.REVOKED, LifecycleStatus.ARCHIVED):
        raise LifecycleViolationError(
            f"{document.did} is {document.lifecycle_status.value}; no further updates"
        )
    if now < document.updated:
        raise InvalidInputError(f"tick {now} precedes last update {document.updated}")

    updates: dict[str, Any] = {}
    for key, value in changes.items():
        if key == "addVerificationMethod":
            method = value if isinstance(value, VerificationMethod) else VerificationMethod.from_value(value)
            if any(m.key_id == method.key_id for m in document.verification_methods):
                raise InvalidInputError(f"keyId {method.key_id!r} already listed")
            updates["verification_methods"] = document.verification_methods + (method,)
        elif key == "serviceEndpoints":
            updates["service_endpoints"] = tuple(value)
        elif key == "scopeOfBehavior":
            updates["scope_of_behavior"] = tuple(value)
        elif key == "toolset":
            updates["toolset"] = tuple(value)
        elif key == "expiry":
            updates["expiry"] = value
        elif key == "lifecycleStatus":
            target = LifecycleStatus(value)
            _check_transition(document.lifecycle_status, target)
            updates["lifecycle_status"] = target
        else:
            raise InvalidInputError(f"unknown change key: {key!r}")
    return replace(document, updated=now, **updates)


def deactivate(document: DidDocument, controller_key: KeyPair, now: int) -> DidDocument:
    """Revoke the document; terminal except for archival."""
    _check_controller(document, controller_key)
    _check_transition(document.lifecycle_status, LifecycleStatus.REVOKED)
    if now < document.updated:
        raise InvalidInputError(f"tick {now} precedes last update {document.updated}")
    return replace(document, lifecycle_status=LifecycleStatus.REVOKED, updated=now)


class DidResolver:
    """In-memory DID to document mapping used by every verification path."""

    def __init__(self) -> None:
        self._documents: dict[str, DidDocument] = {}

    def register(self, document: DidDocument) -> None:
        self._documents[document.did.render()] = document

    def resolve(self, did: AgentDid | str) -> DidDocument:
        key = did.render() if isinstance(did, AgentDid) else did
        try:
            return self._documents[key]
        except KeyError:
            raise ResolutionFailureError(f"cannot resolve {key}") from None

    def knows(self, did: AgentDid | str) -> bool:
        key = did.render() if isinstance(did, AgentDid) else did
        return key in self._documents

    def documents(self) -> Iterable[DidDocument]:
        return list(self._documents.values())
