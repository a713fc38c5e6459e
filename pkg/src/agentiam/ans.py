"""Agent naming service: structured names, signed registry, resolution.

Names follow ``protocol://function.capability.provider.vM.m.p[.extension]``.
Inputs with one- or two-component versions are accepted and zero-padded to
a full triple, keeping the original string for reference.  The registry is
a single signing authority; resolution answers are ordered, filtered on
every query predicate (capabilities, protocol, provider, version range,
liveness, attestations re-verified at resolve time), and signed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Mapping, Optional, Sequence, Union

from .canonical import canonical_bytes
from .credentials import Proof, StatusListStore, VerifiableCredential, verify_credential
from .crypto import KeyPair, verify as verify_raw
from .errors import (
    AnsParseError,
    ConflictError,
    InvalidQueryError,
    NotFoundError,
    RegistrationRefusedError,
    ResolutionFailureError,
    UnauthorizedError,
)
from .identity import AgentDid, DidDocument, DidResolver, LifecycleStatus

__all__ = [
    "AnsName",
    "AnsPattern",
    "AnsRecord",
    "AnsQuery",
    "QueryMode",
    "ResolutionResponse",
    "AnsRegistry",
    "parse_name",
    "parse_pattern",
    "parse_version_range",
    "match_version_range",
]

_TOKEN_RE = re.compile(r"^[A-Za-z0-9_-]+$")
_PROTOCOL_RE = re.compile(r"^[a-z0-9_-]+$")
_VERSION_HEAD_RE = re.compile(r"^v(\d+)$")
_PATTERN_HEAD_RE = re.compile(r"^v(\d+|\*)$")
_NUMBER_RE = re.compile(r"^\d+$")

Wild = Union[int, str]  # version component: int, or "*" in patterns


# ── parsing ─────────────────────────────────────────────────────────────

def _split_segments(text: str) -> tuple[str, list[tuple[str, int]]]:
    """Protocol plus (segment, offset) pairs for everything after '://'."""
    sep = text.find("://")
    if sep <= 0:
        raise AnsParseError("missing 'protocol://' prefix", max(sep, 0))
    protocol = text[:sep]
    if not _PROTOCOL_RE.match(protocol):
        raise AnsParseError(f"bad protocol token {protocol!r}", 0)
    base = sep + 3
    rest = text[base:]
    if not rest:
        raise AnsParseError("empty name after protocol", base)
    segments: list[tuple[str, int]] = []
    offset = base
    for raw in rest.split("."):
        segments.append((raw, offset))
        offset += len(raw) + 1
    return protocol, segments


def _parse(text: str, pattern: bool) -> tuple[str, list[str], tuple[Wild, Wild, Wild], Optional[str], int]:
    """Shared name/pattern parser.

    Returns (protocol, pre-version segments, version triple, extension,
    number of version components given).
    """
    protocol, segments = _split_segments(text)
    head_re = _PATTERN_HEAD_RE if pattern else _VERSION_HEAD_RE

    for seg, off in segments:
        if not seg:
            raise AnsParseError("empty segment", off)
        if seg != "*" and not _TOKEN_RE.match(seg):
            raise AnsParseError(f"illegal characters in segment {seg!r}", off)
        if seg == "*" and not pattern:
            raise AnsParseError("wildcard segment in a concrete name", off)

    version_at = next(
        (i for i, (seg, _) in enumerate(segments) if head_re.match(seg)), None
    )
    if version_at is None:
        raise AnsParseError("missing version segment", len(text))
    if version_at not in (3, 4):
        raise AnsParseError(
            f"expected 3 or 4 segments before the version, got {version_at}",
            segments[version_at][1],
        )

    head = head_re.match(segments[version_at][0]).group(1)
    components: list[Wild] = [head if head == "*" else int(head)]
    cursor = version_at + 1
    component_re = re.compile(r"^(\d+|\*)$") if pattern else _NUMBER_RE
    while cursor < len(segments) and len(components) < 3 and component_re.match(segments[cursor][0]):
        piece = segments[cursor][0]
        components.append(piece if piece == "*" else int(piece))
        cursor += 1
    given = len(components)
    pad: Wild = "*" if pattern else 0
    while len(components) < 3:
        components.append(pad)

    leftovers = segments[cursor:]
    if len(leftovers) > 1:
        raise AnsParseError(
            f"unexpected trailing segment {leftovers[1][0]!r}", leftovers[1][1]
        )
    extension = leftovers[0][0] if leftovers else None

    names = [seg for seg, _ in segments[:version_at]]
    return protocol, names, (components[0], components[1], components[2]), extension, given


def _render(protocol: str, function: str, capability: str, provider: str,
            version: tuple[Wild, Wild, Wild], extension: Optional[str]) -> str:
    text = f"{protocol}://{function}.{capability}.{provider}.v{version[0]}.{version[1]}.{version[2]}"
    return f"{text}.{extension}" if extension is not None else text


@dataclass(frozen=True)
class AnsName:
    """A fully-qualified agent name with a normalized version triple."""

    protocol: str
    agent_function: str
    capability_domain: str
    provider: str
    version: tuple[int, int, int]
    extension: Optional[str] = None
    original: Optional[str] = None  # pre-normalization input, when different

    def render(self) -> str:
        return _render(self.protocol, self.agent_function, self.capability_domain,
                       self.provider, self.version, self.extension)

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class AnsPattern:
    """Name pattern; "*" matches one whole segment or version component."""

    protocol: str
    agent_function: str
    capability_domain: str
    provider: str
    version: tuple[Wild, Wild, Wild]
    extension: Optional[str] = None
    original: Optional[str] = None  # pre-padding input, when different

    def render(self) -> str:
        return _render(self.protocol, self.agent_function, self.capability_domain,
                       self.provider, self.version, self.extension)

    def is_exact(self) -> bool:
        segments = (self.protocol, self.agent_function, self.capability_domain,
                    self.provider, self.extension)
        return "*" not in segments and all(isinstance(c, int) for c in self.version)

    def matches(self, name: AnsName) -> bool:
        def seg(pattern_value: Optional[str], name_value: Optional[str]) -> bool:
            if pattern_value == "*":
                return True
            return pattern_value == name_value

        if not (
            seg(self.protocol, name.protocol)
            and seg(self.agent_function, name.agent_function)
            and seg(self.capability_domain, name.capability_domain)
            and seg(self.provider, name.provider)
            and seg(self.extension, name.extension)
        ):
            return False
        return all(
            p == "*" or p == n for p, n in zip(self.version, name.version)
        )

    def __str__(self) -> str:
        return self.render()


def parse_name(text: str) -> AnsName:
    protocol, names, version, extension, given = _parse(text, pattern=False)
    if len(names) == 4:
        capability = f"{names[1]}.{names[2]}"
        function, provider = names[0], names[3]
    else:
        function, capability, provider = names
    name = AnsName(
        protocol=protocol,
        agent_function=function,
        capability_domain=capability,
        provider=provider,
        version=version,  # type: ignore[arg-type]
        extension=extension,
    )
    if name.render() != text:
        name = replace(name, original=text)
    return name


def parse_pattern(text: str) -> AnsPattern:
    protocol, names, version, extension, _ = _parse(text, pattern=True)
    if len(names) == 4:
        capability = f"{names[1]}.{names[2]}"
        function, provider = names[0], names[3]
    else:
        function, capability, provider = names
    pattern = AnsPattern(
        protocol=protocol,
        agent_function=function,
        capability_domain=capability,
        provider=provider,
        version=version,
        extension=extension,
    )
    if pattern.render() != text:
        pattern = replace(pattern, original=text)
    return pattern


# ── version ranges ──────────────────────────────────────────────────────

_COMPARATOR_RE = re.compile(r"^(>=|<=|==|=|>|<)?v?(\d+)(?:\.(\d+))?(?:\.(\d+))?$")

_OPS: dict[str, Callable[[tuple[int, int, int], tuple[int, int, int]], bool]] = {
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    "=": lambda a, b: a == b,
    "==": lambda a, b: a == b,
}


def parse_version_range(text: str) -> list[tuple[str, tuple[int, int, int]]]:
    """Whitespace-separated comparators, all of which must hold."""
    comparators = []
    offset = 0
    for piece in text.split():
        at = text.find(piece, offset)
        match = _COMPARATOR_RE.match(piece)
        if not match:
            raise AnsParseError(f"malformed comparator {piece!r}", at)
        op = match.group(1) or "="
        version = tuple(int(g) if g is not None else 0 for g in match.groups()[1:])
        comparators.append((op, version))
        offset = at + len(piece)
    if not comparators:
        raise AnsParseError("empty version range", 0)
    return comparators


def match_version_range(range_text: str, version: tuple[int, int, int]) -> bool:
    return all(_OPS[op](tuple(version), bound) for op, bound in parse_version_range(range_text))


# ── registry records ────────────────────────────────────────────────────

@dataclass(frozen=True)
class AnsRecord:
    ans_name: AnsName
    agent_did: str
    service_endpoint: str
    capabilities: tuple[str, ...]
    protocol_extensions: Mapping[str, Any]
    attestation_refs: tuple[str, ...]
    live: bool
    revoked: bool
    registrar_signature: Proof

    def signed_body(self) -> dict[str, Any]:
        return {
            "ansName": self.ans_name.render(),
            "agentDid": self.agent_did,
            "serviceEndpoint": self.service_endpoint,
            "capabilities": list(self.capabilities),
            "protocolExtensions": dict(self.protocol_extensions),
            "attestationRefs": list(self.attestation_refs),
            "live": self.live,
            "revoked": self.revoked,
        }

    def to_value(self) -> dict[str, Any]:
        value = self.signed_body()
        value["ansRecordSignature"] = self.registrar_signature.to_value()
        return value

    def canonical(self) -> bytes:
        return canonical_bytes(self.to_value())

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "AnsRecord":
        return cls(
            ans_name=parse_name(value["ansName"]),
            agent_did=value["agentDid"],
            service_endpoint=value["serviceEndpoint"],
            capabilities=tuple(value["capabilities"]),
            protocol_extensions=dict(value["protocolExtensions"]),
            attestation_refs=tuple(value["attestationRefs"]),
            live=value["live"],
            revoked=value["revoked"],
            registrar_signature=Proof.from_value(value["ansRecordSignature"]),
        )


class QueryMode(str, Enum):
    BY_CAPABILITY = "resolveAgentByCapability"
    BY_NAME_AND_CAPABILITY = "resolveAgentByNameAndCapability"


@dataclass(frozen=True)
class AnsQuery:
    mode: QueryMode
    required_capability: str
    desired_protocol: Optional[str] = None
    preferred_provider: Optional[str] = None
    version_range: Optional[str] = None
    required_attestations: tuple[str, ...] = ()  # vcType values
    ans_name_pattern: Optional[str] = None
    availability_requirement: Optional[str] = None

    def to_value(self) -> dict[str, Any]:
        value: dict[str, Any] = {
            "requestType": self.mode.value,
            "requiredCapability": self.required_capability,
        }
        if self.desired_protocol is not None:
            value["desiredProtocol"] = self.desired_protocol
        if self.preferred_provider is not None:
            value["preferredProvider"] = self.preferred_provider
        if self.version_range is not None:
            value["versionRange"] = self.version_range
        if self.required_attestations:
            value["requiredAttestations"] = [{"vcType": t} for t in self.required_attestations]
        if self.ans_name_pattern is not None:
            value["ansNamePattern"] = self.ans_name_pattern
        if self.availability_requirement is not None:
            value["availabilityRequirement"] = self.availability_requirement
        return value

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "AnsQuery":
        try:
            mode = QueryMode(value["requestType"])
        except (KeyError, ValueError):
            raise InvalidQueryError(f"unknown requestType {value.get('requestType')!r}") from None
        if "requiredCapability" not in value:
            raise InvalidQueryError("requiredCapability is mandatory")
        return cls(
            mode=mode,
            required_capability=value["requiredCapability"],
            desired_protocol=value.get("desiredProtocol"),
            preferred_provider=value.get("preferredProvider"),
            version_range=value.get("versionRange"),
            required_attestations=tuple(
                item["vcType"] for item in value.get("requiredAttestations", ())
            ),
            ans_name_pattern=value.get("ansNamePattern"),
            availability_requirement=value.get("availabilityRequirement"),
        )


@dataclass(frozen=True)
class ResolutionResponse:
    resolution_status: str  # success | not-found | revoked
    resolved_agents: tuple[Mapping[str, Any], ...]
    response_signature: Proof

    def signed_body(self) -> dict[str, Any]:
        return {
            "resolutionStatus": self.resolution_status,
            "resolvedAgents": [dict(a) for a in self.resolved_agents],
        }

    def to_value(self) -> dict[str, Any]:
        value = self.signed_body()
        value["responseSignature"] = self.response_signature.to_value()
        return value

    def canonical(self) -> bytes:
        return canonical_bytes(self.to_value())


def capability_matches(query_capability: str, record_capability: str) -> bool:
    """Exact match, or the query names a strict dotted prefix of the record."""
    return record_capability == query_capability or record_capability.startswith(
        query_capability + "."
    )


class AnsRegistry:
    """Single-authority name registry with signed records and responses."""

    def __init__(
        self,
        authority_doc: DidDocument,
        authority_key: KeyPair,
        resolver: DidResolver,
        credential_lookup: Optional[Callable[[str], Optional[VerifiableCredential]]] = None,
        status_store: Optional[StatusListStore] = None,
    ) -> None:
        self._authority_doc = authority_doc
        self._authority_key = authority_key
        self._resolver = resolver
        self._credential_lookup = credential_lookup or (lambda _vc_id: None)
        self._status_store = status_store
        self._records: dict[str, AnsRecord] = {}

    # -- mutation --------------------------------------------------------

    def _check_authority(self, registrar_key: Optional[KeyPair]) -> KeyPair:
        key = registrar_key or self._authority_key
        if key.public_key != self._authority_key.public_key:
            raise UnauthorizedError("registrar key is not the registry authority")
        return key

    def _signed(self, record: AnsRecord) -> AnsRecord:
        signature = self._authority_key.sign(canonical_bytes(record.signed_body()))
        return replace(
            record,
            registrar_signature=Proof(key_id=self._authority_key.key_id, signature=signature),
        )

    def register(
        self,
        ans_name: str | AnsName,
        agent_did: AgentDid | str,
        service_endpoint: str,
        capabilities: Sequence[str],
        protocol_extensions: Optional[Mapping[str, Any]] = None,
        attestation_refs: Sequence[str] = (),
        live: bool = True,
        registrar_key: Optional[KeyPair] = None,
    ) -> AnsRecord:
        self._check_authority(registrar_key)
        name = parse_name(ans_name) if isinstance(ans_name, str) else ans_name
        rendered = name.render()
        if rendered in self._records:
            raise ConflictError(f"name {rendered!r} already registered")
        did_text = agent_did.render() if isinstance(agent_did, AgentDid) else agent_did
        try:
            document = self._resolver.resolve(did_text)
        except ResolutionFailureError:
            raise RegistrationRefusedError(f"agent {did_text} is not resolvable") from None
        if document.lifecycle_status is not LifecycleStatus.ACTIVE:
            raise RegistrationRefusedError(
                f"agent {did_text} is {document.lifecycle_status.value}"
            )
        record = AnsRecord(
            ans_name=name,
            agent_did=did_text,
            service_endpoint=service_endpoint,
            capabilities=tuple(capabilities),
            protocol_extensions=dict(protocol_extensions or {}),
            attestation_refs=tuple(attestation_refs),
            live=live,
            revoked=False,
            registrar_signature=Proof(key_id="", signature=b""),
        )
        record = self._signed(record)
        self._records[rendered] = record
        return record

    def deregister(
        self, target: str | AnsName | AgentDid, registrar_key: Optional[KeyPair] = None
    ) -> list[str]:
        """Mark records revoked, by exact name or by agent DID."""
        self._check_authority(registrar_key)
        if isinstance(target, AgentDid):
            names = [n for n, r in self._records.items() if r.agent_did == target.render()]
        else:
            name = parse_name(target) if isinstance(target, str) else target
            names = [name.render()] if name.render() in self._records else []
        if not names:
            raise NotFoundError(f"no record for {target}")
        for rendered in names:
            record = self._records[rendered]
            if not record.revoked:
                self._records[rendered] = self._signed(replace(record, revoked=True, live=False))
        return names

    def set_liveness(self, ans_name: str | AnsName, live: bool) -> None:
        name = parse_name(ans_name) if isinstance(ans_name, str) else ans_name
        record = self._records.get(name.render())
        if record is None:
            raise NotFoundError(f"no record for {name.render()!r}")
        if record.live != live:
            self._records[name.render()] = self._signed(replace(record, live=live))

    # -- queries ---------------------------------------------------------

    def record(self, ans_name: str) -> Optional[AnsRecord]:
        return self._records.get(ans_name)

    def records(self) -> list[AnsRecord]:
        return list(self._records.values())

    def _attestation_snippets(
        self, record: AnsRecord, required_types: Sequence[str], now: int
    ) -> Optional[list[dict[str, Any]]]:
        """Snippets for every required type, or None if any is unmet."""
        snippets: list[dict[str, Any]] = []
        for vc_type in required_types:
            satisfied = None
            for ref in record.attestation_refs:
                credential = self._credential_lookup(ref)
                if credential is None or vc_type not in credential.types:
                    continue
                if credential.subject != record.agent_did:
                    continue
                try:
                    result = verify_credential(
                        credential, self._resolver, self._status_store, now=now
                    )
                except ResolutionFailureError:
                    continue
                if result.valid:
                    satisfied = credential
                    break
            if satisfied is None:
                return None
            snippets.append(
                {
                    "type": vc_type,
                    "issuer": satisfied.issuer,
                    "issueDate": satisfied.valid_from,
                }
            )
        return snippets

    def resolve(self, query: AnsQuery, now: int) -> ResolutionResponse:
        if query.mode is QueryMode.BY_NAME_AND_CAPABILITY and not query.ans_name_pattern:
            raise InvalidQueryError("name-mode queries need an ansNamePattern")
        pattern = None
        if query.ans_name_pattern is not None:
            try:
                pattern = parse_pattern(query.ans_name_pattern)
            except AnsParseError as exc:
                raise InvalidQueryError(f"bad ansNamePattern: {exc}") from None
        if query.version_range is not None:
            try:
                parse_version_range(query.version_range)
            except AnsParseError as exc:
                raise InvalidQueryError(f"bad versionRange: {exc}") from None

        matched: list[tuple[AnsRecord, list[dict[str, Any]]]] = []
        for record in self._records.values():
            if record.revoked:
                continue
            if query.availability_requirement == "online_accepting_jobs" and not record.live:
                continue
            if query.desired_protocol and record.ans_name.protocol != query.desired_protocol:
                continue
            if pattern is not None and not pattern.matches(record.ans_name):
                continue
            if not any(
                capability_matches(query.required_capability, cap)
                for cap in record.capabilities
            ):
                continue
            if query.preferred_provider and record.ans_name.provider != query.preferred_provider:
                continue
            if query.version_range is not None and not match_version_range(
                query.version_range, record.ans_name.version
            ):
                continue
            snippets = self._attestation_snippets(record, query.required_attestations, now)
            if snippets is None:
                continue
            matched.append((record, snippets))

        matched.sort(
            key=lambda pair: (
                tuple(-c for c in pair[0].ans_name.version),
                pair[0].agent_did,
            )
        )

        if matched:
            status = "success"
        elif pattern is not None and pattern.is_exact() and self._is_revoked_exact(pattern):
            status = "revoked"
        else:
            status = "not-found"

        resolved = tuple(
            {
                "ansName": record.ans_name.render(),
                "agentDid": record.agent_did,
                "serviceEndpoint": record.service_endpoint,
                "protocolExtensions": dict(record.protocol_extensions),
                "relevantVcSnippets": snippets,
                "ansRecordSignature": record.registrar_signature.to_value(),
            }
            for record, snippets in matched
        )
        body = {"resolutionStatus": status, "resolvedAgents": [dict(a) for a in resolved]}
        signature = self._authority_key.sign(canonical_bytes(body))
        return ResolutionResponse(
            resolution_status=status,
            resolved_agents=resolved,
            response_signature=Proof(key_id=self._authority_key.key_id, signature=signature),
        )

    def _is_revoked_exact(self, pattern: AnsPattern) -> bool:
        name = AnsName(
            protocol=pattern.protocol,
            agent_function=pattern.agent_function,
            capability_domain=pattern.capability_domain,
            provider=pattern.provider,
            version=pattern.version,  # type: ignore[arg-type]
            extension=pattern.extension,
        )
        record = self._records.get(name.render())
        return record is not None and record.revoked

    def verify_response(self, response: ResolutionResponse) -> bool:
        return verify_raw(
            self._authority_key.public_key,
            canonical_bytes(response.signed_body()),
            response.response_signature.signature,
        )
