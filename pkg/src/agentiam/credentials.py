"""Verifiable credentials with hash-based selective disclosure.

The issuer signs a committed form of the credential in which every claim
value is replaced by a salted SHA3-256 commitment.  The holder keeps the
claim values and salts; a presentation re-discloses openings for chosen
claims only, so a verifier learns exactly those values while still
checking the issuer's signature.  Revocation is a bit in an owner-signed
status list whose bits only ever go from 0 to 1.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

from .canonical import canonical_bytes, from_hex, to_hex
from .crypto import ALGORITHM, KeyPair, sha3_256, verify as verify_raw
from .errors import (
    InvalidInputError,
    IssuerInactiveError,
    KeyNotFoundError,
    MonotonicityViolationError,
    ReplayDetectedError,
    UnauthorizedError,
    UnknownClaimError,
)
from .identity import AgentDid, DidDocument, DidResolver, LifecycleStatus

__all__ = [
    "BASE_TYPE",
    "Reason",
    "VerificationResult",
    "Proof",
    "StatusRef",
    "VerifiableCredential",
    "StatusList",
    "StatusListStore",
    "PresentedCredential",
    "Presentation",
    "DisclosedCredential",
    "issue",
    "verify_credential",
    "new_status_list",
    "revoke_index",
    "present",
    "verify_presentation",
    "issue_tool_pass",
    "issue_reputation",
]

BASE_TYPE = "VerifiableCredential"

_COMMIT_TAG = b"agentiam/claim-commitment/v1:"
_SALT_BYTES = 32


class Reason(str, Enum):
    BAD_SIGNATURE = "bad-signature"
    EXPIRED = "expired"
    NOT_YET_VALID = "not-yet-valid"
    REVOKED = "revoked"
    ISSUER_REVOKED = "issuer-revoked"
    UNTRUSTED_ISSUER = "untrusted-issuer"


@dataclass(frozen=True)
class VerificationResult:
    """Outcome of credential or presentation verification.

    ``valid`` is true exactly when ``reasons`` is empty; every applicable
    failure is enumerated rather than short-circuited.
    """

    reasons: tuple[Reason, ...]

    @property
    def valid(self) -> bool:
        return not self.reasons

    def to_value(self) -> dict[str, Any]:
        return {"valid": self.valid, "reasons": [r.value for r in self.reasons]}


@dataclass(frozen=True)
class Proof:
    key_id: str
    signature: bytes
    algorithm: str = ALGORITHM

    def to_value(self) -> dict[str, Any]:
        return {
            "keyId": self.key_id,
            "algorithm": self.algorithm,
            "signatureValue": to_hex(self.signature),
        }

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "Proof":
        return cls(
            key_id=value["keyId"],
            algorithm=value["algorithm"],
            signature=from_hex(value["signatureValue"]),
        )


@dataclass(frozen=True)
class StatusRef:
    status_list_id: str
    index: int

    def to_value(self) -> dict[str, Any]:
        return {"statusListId": self.status_list_id, "index": self.index}

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "StatusRef":
        return cls(status_list_id=value["statusListId"], index=value["index"])


def _commit(key: str, salt: bytes, value: Any) -> bytes:
    encoded_key = key.encode("utf-8")
    return sha3_256(
        _COMMIT_TAG
        + len(encoded_key).to_bytes(2, "big")
        + encoded_key
        + salt
        + canonical_bytes(value)
    )


@dataclass(frozen=True)
class VerifiableCredential:
    """A credential as held by its subject: claims, salts, issuer proof."""

    credential_id: str
    types: tuple[str, ...]
    issuer: str
    subject: str
    claims: Mapping[str, Any]
    claim_salts: Mapping[str, bytes]
    valid_from: int
    valid_until: Optional[int]
    status_ref: Optional[StatusRef]
    proof: Proof

    def committed_subject(self) -> dict[str, Any]:
        subject: dict[str, Any] = {"id": self.subject}
        for key in sorted(self.claims):
            if key == "id":
                continue
            subject[key] = to_hex(_commit(key, self.claim_salts[key], self.claims[key]))
        return subject

    def committed_body(self) -> dict[str, Any]:
        return _committed_body(
            credential_id=self.credential_id,
            types=self.types,
            issuer=self.issuer,
            valid_from=self.valid_from,
            valid_until=self.valid_until,
            status_ref=self.status_ref,
            committed_subject=self.committed_subject(),
        )

    def to_value(self) -> dict[str, Any]:
        value = self.committed_body()
        value["credentialSubject"] = {"id": self.subject, **{k: v for k, v in self.claims.items() if k != "id"}}
        value["claimSalts"] = {k: to_hex(s) for k, s in self.claim_salts.items()}
        value["proof"] = self.proof.to_value()
        return value

    def canonical(self) -> bytes:
        return canonical_bytes(self.to_value())

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "VerifiableCredential":
        subject_map = dict(value["credentialSubject"])
        subject = subject_map.pop("id")
        status = value.get("credentialStatus")
        return cls(
            credential_id=value["id"],
            types=tuple(value["type"]),
            issuer=value["issuer"],
            subject=subject,
            claims=subject_map,
            claim_salts={k: from_hex(s) for k, s in value["claimSalts"].items()},
            valid_from=value["validFrom"],
            valid_until=value.get("validUntil"),
            status_ref=StatusRef.from_value(status) if status else None,
            proof=Proof.from_value(value["proof"]),
        )


def _committed_body(
    credential_id: str,
    types: Sequence[str],
    issuer: str,
    valid_from: int,
    valid_until: Optional[int],
    status_ref: Optional[StatusRef],
    committed_subject: Mapping[str, Any],
) -> dict[str, Any]:
    body: dict[str, Any] = {
        "id": credential_id,
        "type": list(types),
        "issuer": issuer,
        "validFrom": valid_from,
        "validUntil": valid_until,
        "credentialSubject": dict(committed_subject),
    }
    if status_ref is not None:
        body["credentialStatus"] = status_ref.to_value()
    return body


def issue(
    issuer_doc: DidDocument,
    issuer_key: KeyPair,
    subject: AgentDid | str,
    types: Sequence[str],
    claims: Mapping[str, Any],
    valid_from: int,
    valid_until: Optional[int] = None,
    status_ref: Optional[StatusRef] = None,
    credential_id: Optional[str] = None,
    salt_source: Optional[Callable[[], bytes]] = None,
) -> VerifiableCredential:
    """Issue a credential signed over its committed form.

    ``salt_source`` lets deterministic runs supply reproducible salts; it
    defaults to the OS entropy pool.
    """
    if issuer_doc.lifecycle_status is not LifecycleStatus.ACTIVE:
        raise IssuerInactiveError(
            f"issuer {issuer_doc.did} is {issuer_doc.lifecycle_status.value}"
        )
    method = issuer_doc.method_for(issuer_key.key_id)
    if method.public_key != issuer_key.public_key:
        raise UnauthorizedError(f"key {issuer_key.key_id!r} does not match issuer document")
    if valid_until is not None and valid_until < valid_from:
        raise InvalidInputError(f"validity window [{valid_from}, {valid_until}] is ill-ordered")

    subject_did = subject.render() if isinstance(subject, AgentDid) else subject
    claim_map = dict(claims)
    declared_id = claim_map.pop("id", subject_did)
    if declared_id != subject_did:
        raise InvalidInputError("claim map id does not match subject")
    for key in claim_map:
        if not isinstance(key, str):
            raise InvalidInputError("claim keys must be strings")

    type_list = tuple(types) if BASE_TYPE in types else (BASE_TYPE, *types)
    draw = salt_source or (lambda: secrets.token_bytes(_SALT_BYTES))
    salts = {key: draw() for key in sorted(claim_map)}

    committed_subject = {"id": subject_did}
    for key in sorted(claim_map):
        committed_subject[key] = to_hex(_commit(key, salts[key], claim_map[key]))

    if credential_id is None:
        digest = sha3_256(
            canonical_bytes(
                _committed_body("", type_list, issuer_doc.did.render(), valid_from, valid_until, status_ref, committed_subject)
            )
        )
        credential_id = f"vc:agentlab:{to_hex(digest)[:32]}"

    body = _committed_body(
        credential_id, type_list, issuer_doc.did.render(), valid_from, valid_until, status_ref, committed_subject
    )
    signature = issuer_key.sign(canonical_bytes(body))
    return VerifiableCredential(
        credential_id=credential_id,
        types=type_list,
        issuer=issuer_doc.did.render(),
        subject=subject_did,
        claims=claim_map,
        claim_salts=salts,
        valid_from=valid_from,
        valid_until=valid_until,
        status_ref=status_ref,
        proof=Proof(key_id=issuer_key.key_id, signature=signature),
    )


# ── status lists ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class StatusList:
    """Owner-signed revocation bitstring; bits move from 0 to 1 only."""

    list_id: str
    owner: str
    size: int
    bits: bytes
    version: int
    proof: Proof

    def is_set(self, index: int) -> bool:
        if index < 0 or index >= self.size:
            return False
        return bool(self.bits[index // 8] & (1 << (index % 8)))

    def signed_body(self) -> dict[str, Any]:
        return {
            "statusListId": self.list_id,
            "owner": self.owner,
            "size": self.size,
            "bits": to_hex(self.bits),
            "version": self.version,
        }

    def to_value(self) -> dict[str, Any]:
        value = self.signed_body()
        value["proof"] = self.proof.to_value()
        return value

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "StatusList":
        return cls(
            list_id=value["statusListId"],
            owner=value["owner"],
            size=value["size"],
            bits=from_hex(value["bits"]),
            version=value["version"],
            proof=Proof.from_value(value["proof"]),
        )


def _sign_status(body: dict[str, Any], owner_key: KeyPair) -> Proof:
    return Proof(key_id=owner_key.key_id, signature=owner_key.sign(canonical_bytes(body)))


def new_status_list(list_id: str, owner_doc: DidDocument, owner_key: KeyPair, size: int) -> StatusList:
    if size <= 0:
        raise InvalidInputError("status list size must be positive")
    owner_doc.method_for(owner_key.key_id)
    bits = bytes((size + 7) // 8)
    body = {
        "statusListId": list_id,
        "owner": owner_doc.did.render(),
        "size": size,
        "bits": to_hex(bits),
        "version": 0,
    }
    return StatusList(
        list_id=list_id,
        owner=owner_doc.did.render(),
        size=size,
        bits=bits,
        version=0,
        proof=_sign_status(body, owner_key),
    )


def revoke_index(status_list: StatusList, index: int, owner_key: KeyPair) -> StatusList:
    """Set one bit; version increments once per accepted call."""
    owner_did, _, _ = owner_key.key_id.partition("#")
    if owner_did != status_list.owner:
        raise UnauthorizedError(f"key {owner_key.key_id!r} does not own {status_list.list_id!r}")
    if index < 0 or index > status_list.size:
        raise InvalidInputError(f"index {index} outside [0, {status_list.size}]")
    size = status_list.size
    if index == size:
        size += 1  # appending one slot is the only permitted growth
    if status_list.is_set(index):
        raise MonotonicityViolationError(f"bit {index} of {status_list.list_id!r} is already set")
    bits = bytearray(status_list.bits)
    if len(bits) < (size + 7) // 8:
        bits.extend(b"\x00" * ((size + 7) // 8 - len(bits)))
    bits[index // 8] |= 1 << (index % 8)
    body = {
        "statusListId": status_list.list_id,
        "owner": status_list.owner,
        "size": size,
        "bits": to_hex(bytes(bits)),
        "version": status_list.version + 1,
    }
    return replace(
        status_list,
        size=size,
        bits=bytes(bits),
        version=status_list.version + 1,
        proof=_sign_status(body, owner_key),
    )


class StatusListStore:
    """Holds the latest accepted version of each status list."""

    def __init__(self) -> None:
        self._lists: dict[str, StatusList] = {}

    def put(self, status_list: StatusList) -> None:
        current = self._lists.get(status_list.list_id)
        if current is not None and status_list.version <= current.version:
            raise MonotonicityViolationError(
                f"version {status_list.version} does not advance {status_list.list_id!r}"
            )
        self._lists[status_list.list_id] = status_list

    def get(self, list_id: str) -> StatusList:
        from .errors import NotFoundError

        try:
            return self._lists[list_id]
        except KeyError:
            raise NotFoundError(f"status list {list_id!r} unknown") from None

    def is_revoked(self, ref: StatusRef) -> bool:
        current = self._lists.get(ref.status_list_id)
        return current.is_set(ref.index) if current else False

    def lists(self) -> Iterable[StatusList]:
        return list(self._lists.values())


StatusLookup = Callable[[StatusRef], bool]


def _status_lookup(source: StatusListStore | StatusLookup | None) -> StatusLookup:
    if source is None:
        return lambda ref: False
    if isinstance(source, StatusListStore):
        return source.is_revoked
    return source


# ── verification ────────────────────────────────────────────────────────

def _verify_committed(
    body: Mapping[str, Any],
    proof: Proof,
    resolver: DidResolver,
    status_lookup: StatusLookup,
    now: int,
    trusted_issuers: Optional[Iterable[str]],
) -> list[Reason]:
    reasons: list[Reason] = []
    issuer_doc = resolver.resolve(body["issuer"])

    if issuer_doc.lifecycle_status is not LifecycleStatus.ACTIVE:
        reasons.append(Reason.ISSUER_REVOKED)

    key_did, _, _ = proof.key_id.partition("#")
    signature_ok = False
    if key_did == body["issuer"]:
        try:
            method = issuer_doc.method_for(proof.key_id)
        except KeyNotFoundError:
            method = None
        if method is not None:
            signature_ok = verify_raw(method.public_key, canonical_bytes(dict(body)), proof.signature)
    if not signature_ok:
        reasons.append(Reason.BAD_SIGNATURE)

    if now < body["validFrom"]:
        reasons.append(Reason.NOT_YET_VALID)
    if body["validUntil"] is not None and now > body["validUntil"]:
        reasons.append(Reason.EXPIRED)

    status = body.get("credentialStatus")
    if status is not None and status_lookup(StatusRef.from_value(status)):
        reasons.append(Reason.REVOKED)

    if trusted_issuers is not None and body["issuer"] not in set(trusted_issuers):
        reasons.append(Reason.UNTRUSTED_ISSUER)

    return reasons


def verify_credential(
    credential: VerifiableCredential,
    resolver: DidResolver,
    status_lookup: StatusListStore | StatusLookup | None,
    now: int,
    trusted_issuers: Optional[Iterable[str]] = None,
) -> VerificationResult:
    """Check signature, validity window, status, and issuer standing.

    Every applicable failure is collected; an unresolvable issuer raises
    instead, since nothing can be said about such a credential.
    """
    reasons = _verify_committed(
        credential.committed_body(),
        credential.proof,
        resolver,
        _status_lookup(status_lookup),
        now,
        trusted_issuers,
    )
    return VerificationResult(reasons=tuple(reasons))


# ── presentations ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class PresentedCredential:
    """Committed credential plus openings for the disclosed claims."""

    body: Mapping[str, Any]
    proof: Proof
    openings: Mapping[str, tuple[Any, bytes]]

    def to_value(self) -> dict[str, Any]:
        return {
            "credential": dict(self.body),
            "proof": self.proof.to_value(),
            "openings": {
                key: {"value": value, "salt": to_hex(salt)}
                for key, (value, salt) in sorted(self.openings.items())
            },
        }

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "PresentedCredential":
        return cls(
            body=dict(value["credential"]),
            proof=Proof.from_value(value["proof"]),
            openings={
                key: (opening["value"], from_hex(opening["salt"]))
                for key, opening in value["openings"].items()
            },
        )


@dataclass(frozen=True)
class Presentation:
    holder: str
    nonce: bytes
    credentials: tuple[PresentedCredential, ...]
    holder_proof: Proof

    def signed_body(self) -> dict[str, Any]:
        return {
            "holder": self.holder,
            "nonce": to_hex(self.nonce),
            "credentials": [c.to_value() for c in self.credentials],
        }

    def to_value(self) -> dict[str, Any]:
        value = self.signed_body()
        value["holderProof"] = self.holder_proof.to_value()
        return value

    def canonical(self) -> bytes:
        return canonical_bytes(self.to_value())

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "Presentation":
        return cls(
            holder=value["holder"],
            nonce=from_hex(value["nonce"]),
            credentials=tuple(PresentedCredential.from_value(v) for v in value["credentials"]),
            holder_proof=Proof.from_value(value["holderProof"]),
        )


@dataclass(frozen=True)
class DisclosedCredential:
    """What a verifier learns about one credential: exactly the openings."""

    credential_id: str
    types: tuple[str, ...]
    issuer: str
    subject: str
    claims: dict[str, Any]


def present(
    holder_key: KeyPair,
    credentials: Sequence[VerifiableCredential],
    disclose: Mapping[str, Iterable[str]],
    nonce: bytes,
) -> Presentation:
    """Build a presentation disclosing the named claims of each credential.

    ``disclose`` maps credential id to the claim keys to open; credentials
    not named disclose nothing beyond their committed form.
    """
    holder_did, _, _ = holder_key.key_id.partition("#")
    presented: list[PresentedCredential] = []
    for credential in credentials:
        if credential.subject != holder_did:
            raise UnauthorizedError(
                f"{holder_did} is not the subject of {credential.credential_id!r}"
            )
        keys = set(disclose.get(credential.credential_id, ()))
        unknown = keys - set(credential.claims)
        if unknown:
            raise UnknownClaimError(
                f"credential {credential.credential_id!r} has no claims {sorted(unknown)}"
            )
        openings = {
            key: (credential.claims[key], credential.claim_salts[key]) for key in sorted(keys)
        }
        presented.append(
            PresentedCredential(
                body=credential.committed_body(),
                proof=credential.proof,
                openings=openings,
            )
        )
    body = {
        "holder": holder_did,
        "nonce": to_hex(nonce),
        "credentials": [c.to_value() for c in presented],
    }
    return Presentation(
        holder=holder_did,
        nonce=nonce,
        credentials=tuple(presented),
        holder_proof=Proof(key_id=holder_key.key_id, signature=holder_key.sign(canonical_bytes(body))),
    )


def verify_presentation(
    presentation: Presentation,
    resolver: DidResolver,
    status_lookup: StatusListStore | StatusLookup | None,
    now: int,
    nonce: bytes,
    trusted_issuers: Optional[Iterable[str]] = None,
) -> tuple[VerificationResult, list[DisclosedCredential]]:
    """Verify holder binding, issuer proofs, and every disclosed opening.

    Returns the aggregate result plus exactly the disclosed claims; a
    nonce mismatch raises ``ReplayDetectedError`` before any other work.
    """
    if presentation.nonce != nonce:
        raise ReplayDetectedError("presentation bound to a different nonce")

    lookup = _status_lookup(status_lookup)
    reasons: list[Reason] = []

    holder_doc = resolver.resolve(presentation.holder)
    holder_key_ok = False
    try:
        method = holder_doc.method_for(presentation.holder_proof.key_id)
    except KeyNotFoundError:
        method = None
    if method is not None:
        holder_key_ok = verify_raw(
            method.public_key,
            canonical_bytes(presentation.signed_body()),
            presentation.holder_proof.signature,
        )
    if not holder_key_ok:
        reasons.append(Reason.BAD_SIGNATURE)

    disclosed: list[DisclosedCredential] = []
    for item in presentation.credentials:
        body = item.body
        subject = body["credentialSubject"]
        if subject.get("id") != presentation.holder:
            reasons.append(Reason.BAD_SIGNATURE)
        reasons.extend(
            _verify_committed(body, item.proof, resolver, lookup, now, trusted_issuers)
        )

        claims: dict[str, Any] = {}
        for key, (value, salt) in item.openings.items():
            if key not in subject:
                raise UnknownClaimError(
                    f"opening for {key!r} has no commitment in {body['id']!r}"
                )
            if to_hex(_commit(key, salt, value)) != subject[key]:
                reasons.append(Reason.BAD_SIGNATURE)
            else:
                claims[key] = value
        disclosed.append(
            DisclosedCredential(
                credential_id=body["id"],
                types=tuple(body["type"]),
                issuer=body["issuer"],
                subject=subject["id"],
                claims=claims,
            )
        )

    ordered = tuple(dict.fromkeys(reasons))  # dedupe, preserve first-seen order
    return VerificationResult(reasons=ordered), disclosed


# ── common credential shapes ────────────────────────────────────────────

def issue_tool_pass(
    issuer_doc: DidDocument,
    issuer_key: KeyPair,
    subject: AgentDid | str,
    tool_did: str,
    allowed_actions: Sequence[str],
    job_id: str,
    input_handle: str,
    output_handle: str,
    valid_from: int,
    window_ticks: int = 15,
    status_ref: Optional[StatusRef] = None,
    salt_source: Optional[Callable[[], bytes]] = None,
) -> VerifiableCredential:
    """Short-lived pass for one tool, one job; valid on exactly
    ``window_ticks`` consecutive ticks starting at ``valid_from``."""
    if window_ticks <= 0:
        raise InvalidInputError("window must span at least one tick")
    return issue(
        issuer_doc,
        issuer_key,
        subject,
        types=(BASE_TYPE, "MCPToolAccessPass"),
        claims={
            "authorizedToolDID": tool_did,
            "allowedActions": list(allowed_actions),
            "jobId": job_id,
            "inputDataHandle": input_handle,
            "outputDataHandle": output_handle,
        },
        valid_from=valid_from,
        valid_until=valid_from + window_ticks - 1,
        status_ref=status_ref,
        salt_source=salt_source,
    )


def issue_reputation(
    issuer_doc: DidDocument,
    issuer_key: KeyPair,
    subject: AgentDid | str,
    rating: int,
    task_id: str,
    capability_context: str,
    comment: str,
    valid_from: int,
    valid_until: Optional[int] = None,
    salt_source: Optional[Callable[[], bytes]] = None,
) -> VerifiableCredential:
    """Peer feedback about one completed task, rated 1 to 5."""
    if not 1 <= rating <= 5:
        raise InvalidInputError("rating must be in [1, 5]")
    return issue(
        issuer_doc,
        issuer_key,
        subject,
        types=(BASE_TYPE, "ReputationCredential", "PerformanceReview"),
        claims={
            "ansCapabilityContext": capability_context,
            "rating": rating,
            "comment": comment,
            "taskId": task_id,
        },
        valid_from=valid_from,
        valid_until=valid_until,
        salt_source=salt_source,
    )
