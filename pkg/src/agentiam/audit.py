"""Append-only, hash-chained audit log with signed entries.

Every enforcement-relevant event lands here: registry lookups, credential
presentations, policy decisions, session changes, message deliveries. Each
entry commits to its predecessor's digest and is signed by a single log
authority key, so any later mutation, insertion, or deletion is detectable
by rewalking the chain. Compliance questions are answered by scanning the
chain with a closed predicate and disclosing full entries only for
violations; compliant traffic stays aggregated behind the chain-head
commitment.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .canonical import canonical_bytes, canonical_loads, from_hex, to_hex
from .crypto import KeyPair, hash_value, sha3_256, verify
from .errors import (
    ClockViolationError,
    InvalidEntryError,
    InvalidPredicateError,
    NotFoundError,
)
from .policy import OPERATORS, PathRef, Predicate

GENESIS_HASH = b"\x00" * 32

# Keys whose shared values link entries into one provenance chain.
LINK_KEYS = ("taskId", "jobId", "messageId")

HEAD_SUFFIX = ".head"


@dataclass(frozen=True)
class LogEntry:
    event_id: str
    tick: int
    initiating_system: str
    agent_did: str
    action_performed: str
    input_parameters_hash: str
    presented_vc_ids: tuple[str, ...]
    outcome: Mapping[str, Any]
    prev_entry_hash: bytes
    signature: bytes
    agent_ans_name: Optional[str] = None
    target_resource_did: Optional[str] = None
    target_resource_ans_name: Optional[str] = None
    decision_policy_id: Optional[str] = None
    collaboration_context: Optional[Mapping[str, Any]] = None

    def signed_body(self) -> dict[str, Any]:
        body: dict[str, Any] = {
            "eventId": self.event_id,
            "tick": self.tick,
            "initiatingSystem": self.initiating_system,
            "agentDid": self.agent_did,
            "actionPerformed": self.action_performed,
            "inputParametersHash": self.input_parameters_hash,
            "presentedVcIds": list(self.presented_vc_ids),
            "outcome": dict(self.outcome),
            "prevEntryHash": to_hex(self.prev_entry_hash),
        }
        if self.agent_ans_name is not None:
            body["agentAnsName"] = self.agent_ans_name
        if self.target_resource_did is not None:
            body["targetResourceDid"] = self.target_resource_did
        if self.target_resource_ans_name is not None:
            body["targetResourceAnsName"] = self.target_resource_ans_name
        if self.decision_policy_id is not None:
            body["decisionPolicyId"] = self.decision_policy_id
        if self.collaboration_context is not None:
            body["collaborationContext"] = dict(self.collaboration_context)
        return body

    def to_value(self) -> dict[str, Any]:
        body = self.signed_body()
        body["logEntrySignature"] = to_hex(self.signature)
        return body

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "LogEntry":
        context = value.get("collaborationContext")
        return cls(
            event_id=value["eventId"],
            tick=value["tick"],
            initiating_system=value["initiatingSystem"],
            agent_did=value["agentDid"],
            action_performed=value["actionPerformed"],
            input_parameters_hash=value["inputParametersHash"],
            presented_vc_ids=tuple(value["presentedVcIds"]),
            outcome=dict(value["outcome"]),
            prev_entry_hash=from_hex(value["prevEntryHash"]),
            signature=from_hex(value["logEntrySignature"]),
            agent_ans_name=value.get("agentAnsName"),
            target_resource_did=value.get("targetResourceDid"),
            target_resource_ans_name=value.get("targetResourceAnsName"),
            decision_policy_id=value.get("decisionPolicyId"),
            collaboration_context=dict(context) if context is not None else None,
        )


def entry_hash(entry: LogEntry) -> bytes:
    """Digest over the full entry, signature included."""
    return sha3_256(canonical_bytes(entry.to_value()))


class AuditLog:
    """Single-authority chain. One appender; reads return immutable snapshots.

    When ``path`` is given every entry is also written as one canonical line
    and the chain head is mirrored to a sidecar file next to the log.
    """

    def __init__(self, authority: KeyPair, *, path: Optional[Path] = None) -> None:
        self._authority = authority
        self._path = Path(path) if path is not None else None
        self._entries: list[LogEntry] = []
        self._counter = 0
        if self._path is not None and self._path.exists():
            self._entries = list(load_log(self._path))
            self._counter = len(self._entries)

    @property
    def public_key(self) -> bytes:
        return self._authority.public_key

    def entries(self) -> tuple[LogEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def head_hash(self) -> bytes:
        if not self._entries:
            return GENESIS_HASH
        return entry_hash(self._entries[-1])

    def append(
        self,
        *,
        agent_did: str,
        action: str,
        now: int,
        initiating_system: str = "AdapterEnforcementMiddleware",
        agent_ans_name: Optional[str] = None,
        target_resource_did: Optional[str] = None,
        target_resource_ans_name: Optional[str] = None,
        input_parameters: Any = None,
        presented_vc_ids: Sequence[str] = (),
        decision_policy_id: Optional[str] = None,
        collaboration_context: Optional[Mapping[str, Any]] = None,
        outcome: Optional[Mapping[str, Any]] = None,
    ) -> LogEntry:
        if not agent_did:
            raise InvalidEntryError("log entry requires agentDid")
        if self._entries and now < self._entries[-1].tick:
            raise ClockViolationError(
                f"tick {now} precedes chain head tick {self._entries[-1].tick}"
            )
        event_id = "evt-%06d-%s" % (
            self._counter,
            to_hex(sha3_256(canonical_bytes([agent_did, self._counter])))[:8],
        )
        unsigned = LogEntry(
            event_id=event_id,
            tick=now,
            initiating_system=initiating_system,
            agent_did=agent_did,
            action_performed=action,
            input_parameters_hash=to_hex(hash_value(input_parameters)),
            presented_vc_ids=tuple(presented_vc_ids),
            outcome=dict(outcome) if outcome is not None else {"status": "Success"},
            prev_entry_hash=self.head_hash(),
            signature=b"",
            agent_ans_name=agent_ans_name,
            target_resource_did=target_resource_did,
            target_resource_ans_name=target_resource_ans_name,
            decision_policy_id=decision_policy_id,
            collaboration_context=collaboration_context,
        )
        entry = replace(
            unsigned, signature=self._authority.sign(canonical_bytes(unsigned.signed_body()))
        )
        self._entries.append(entry)
        self._counter += 1
        if self._path is not None:
            with self._path.open("ab") as handle:
                handle.write(canonical_bytes(entry.to_value()) + b"\n")
            write_head(self._path, self.head_hash(), len(self._entries))
        return entry


def verify_chain(
    entries: Sequence[LogEntry],
    public_key: bytes,
    *,
    expected_head: Optional[bytes] = None,
) -> tuple[bool, Optional[int]]:
    """Walk the chain; on corruption return the index of the earliest entry
    whose own signature or incoming link fails. A truncated tail only shows
    up against ``expected_head`` and is reported at index ``len(entries)``.
    """
    prev = GENESIS_HASH
    for index, entry in enumerate(entries):
        if entry.prev_entry_hash != prev:
            return False, index
        if not verify(public_key, canonical_bytes(entry.signed_body()), entry.signature):
            return False, index
        prev = entry_hash(entry)
    if expected_head is not None and prev != expected_head:
        return False, len(entries)
    return True, None


def load_log(path: Path) -> tuple[LogEntry, ...]:
    entries = []
    with Path(path).open("rb") as handle:
        for line in handle:
            line = line.strip()
            if line:
                entries.append(LogEntry.from_value(canonical_loads(line)))
    return tuple(entries)


def write_head(path: Path, head: bytes, length: int) -> None:
    sidecar = Path(str(path) + HEAD_SUFFIX)
    sidecar.write_bytes(
        canonical_bytes({"headHash": to_hex(head), "entryCount": length}) + b"\n"
    )


def read_head(path: Path) -> Optional[dict[str, Any]]:
    sidecar = Path(str(path) + HEAD_SUFFIX)
    if not sidecar.exists():
        return None
    return canonical_loads(sidecar.read_bytes().strip())


def verify_log_file(path: Path, public_key: bytes) -> tuple[bool, Optional[int]]:
    """File-level walk.

    A line that no longer parses, or that is not the canonical serialization
    of its parsed value, counts as corruption at its own entry position; the
    canonicality check makes every byte-level edit visible even when the
    edited line still decodes to an equivalent value.
    """
    entries: list[LogEntry] = []
    with Path(path).open("rb") as handle:
        for raw in handle:
            line = raw.rstrip(b"\n")
            if not line:
                continue
            try:
                entry = LogEntry.from_value(canonical_loads(line))
                canonical = canonical_bytes(entry.to_value()) == line
            except Exception:
                entry, canonical = None, False
            if entry is None or not canonical:
                ok, bad = verify_chain(entries, public_key)
                return False, bad if not ok else len(entries)
            entries.append(entry)
    head = read_head(path)
    expected = from_hex(head["headHash"]) if head is not None else None
    return verify_chain(entries, public_key, expected_head=expected)


def _link_refs(value: Any, refs: set[tuple[str, str]]) -> None:
    if isinstance(value, Mapping):
        for key, item in value.items():
            if key in LINK_KEYS and isinstance(item, str):
                refs.add((key, item))
            _link_refs(item, refs)
    elif isinstance(value, (list, tuple)):
        for item in value:
            _link_refs(item, refs)


def link_refs(entry: LogEntry) -> frozenset[tuple[str, str]]:
    """All (key, value) pairs under taskId/jobId/messageId anywhere in the
    entry, including nested payload hashes and collaboration context.
    """
    refs: set[tuple[str, str]] = set()
    _link_refs(entry.to_value(), refs)
    return frozenset(refs)


@dataclass(frozen=True)
class ProvenanceChain:
    start_ref: str
    entries: tuple[LogEntry, ...]

    @property
    def event_ids(self) -> tuple[str, ...]:
        return tuple(entry.event_id for entry in self.entries)

    def to_value(self) -> dict[str, Any]:
        return {
            "startRef": self.start_ref,
            "eventIds": list(self.event_ids),
            "entries": [entry.to_value() for entry in self.entries],
        }


def extract_provenance(entries: Sequence[LogEntry], start_ref: str) -> ProvenanceChain:
    """Maximal set of entries connected to ``start_ref`` through shared link
    keys, ordered by tick (chain position breaks ties). ``start_ref`` may be
    an eventId or any linking value.
    """
    refs = [link_refs(entry) for entry in entries]
    seeds = [
        i
        for i, entry in enumerate(entries)
        if entry.event_id == start_ref or any(value == start_ref for _, value in refs[i])
    ]
    if not seeds:
        raise NotFoundError(f"no log entry references {start_ref!r}")
    member: set[int] = set()
    queue = deque(seeds)
    while queue:
        i = queue.popleft()
        if i in member:
            continue
        member.add(i)
        for j in range(len(entries)):
            if j not in member and refs[i] & refs[j]:
                queue.append(j)
    ordered = sorted(member, key=lambda i: (entries[i].tick, i))
    return ProvenanceChain(start_ref=start_ref, entries=tuple(entries[i] for i in ordered))


@dataclass(frozen=True)
class ComplianceReport:
    predicate_description: str
    log_root_commitment: bytes
    matched_count: int
    violation_count: int
    violations: tuple[LogEntry, ...]
    auditor_nonce: str
    signature: bytes

    def signed_body(self) -> dict[str, Any]:
        return {
            "predicateDescription": self.predicate_description,
            "logRootCommitment": to_hex(self.log_root_commitment),
            "matchedCount": self.matched_count,
            "violationCount": self.violation_count,
            "violations": [entry.to_value() for entry in self.violations],
            "auditorNonce": self.auditor_nonce,
        }

    def to_value(self) -> dict[str, Any]:
        body = self.signed_body()
        body["reportSignature"] = to_hex(self.signature)
        return body


_PREDICATE_ROOTS = ("entry", "approvedIssuers")


def _check_predicate_paths(predicate: Predicate) -> None:
    paths = [predicate.attribute_path]
    if isinstance(predicate.value, PathRef):
        paths.append(predicate.value.path)
    for path in paths:
        root = path.split(".", 1)[0].split("[", 1)[0]
        if root not in _PREDICATE_ROOTS:
            raise InvalidPredicateError(
                f"predicate path {path!r} must start with one of {_PREDICATE_ROOTS}"
            )


def _load_predicates(raw: Iterable[Predicate | Mapping[str, Any]]) -> tuple[Predicate, ...]:
    out = []
    for item in raw:
        if isinstance(item, Predicate):
            predicate = item
        else:
            try:
                predicate = Predicate.from_value(item)
            except Exception as exc:
                raise InvalidPredicateError(str(exc)) from exc
        if predicate.operator not in OPERATORS:
            raise InvalidPredicateError(f"unknown operator {predicate.operator!r}")
        _check_predicate_paths(predicate)
        out.append(predicate)
    return tuple(out)


def compliance_report(
    entries: Sequence[LogEntry],
    *,
    description: str,
    scope: Iterable[Predicate | Mapping[str, Any]],
    requirement: Iterable[Predicate | Mapping[str, Any]],
    approved_issuers: Sequence[str] = (),
    auditor_nonce: str,
    authority: KeyPair,
) -> ComplianceReport:
    """Scan the chain: entries satisfying every ``scope`` predicate are in
    scope; those also satisfying every ``requirement`` predicate count as
    matched, the rest are violations and are disclosed in full. Predicates
    address entry fields under ``entry.`` and the issuer allowlist under
    ``approvedIssuers``.
    """
    scope_predicates = _load_predicates(scope)
    requirement_predicates = _load_predicates(requirement)
    if not requirement_predicates:
        raise InvalidPredicateError("requirement must contain at least one predicate")
    matched = 0
    violations: list[LogEntry] = []
    for entry in entries:
        context = {
            "entry": entry.to_value(),
            "approvedIssuers": list(approved_issuers),
        }
        if not all(p.holds(context) for p in scope_predicates):
            continue
        if all(p.holds(context) for p in requirement_predicates):
            matched += 1
        else:
            violations.append(entry)
    commitment = entry_hash(entries[-1]) if entries else GENESIS_HASH
    unsigned = ComplianceReport(
        predicate_description=description,
        log_root_commitment=commitment,
        matched_count=matched,
        violation_count=len(violations),
        violations=tuple(violations),
        auditor_nonce=auditor_nonce,
        signature=b"",
    )
    return replace(
        unsigned, signature=authority.sign(canonical_bytes(unsigned.signed_body()))
    )


def verify_report(
    report: ComplianceReport,
    public_key: bytes,
    entries: Optional[Sequence[LogEntry]] = None,
) -> bool:
    if not verify(public_key, canonical_bytes(report.signed_body()), report.signature):
        return False
    for entry in report.violations:
        if not verify(public_key, canonical_bytes(entry.signed_body()), entry.signature):
            return False
    if entries is not None:
        commitment = entry_hash(entries[-1]) if entries else GENESIS_HASH
        if report.log_root_commitment != commitment:
            return False
        chained = {entry.event_id: entry for entry in entries}
        for entry in report.violations:
            if chained.get(entry.event_id) != entry:
                return False
    return True
