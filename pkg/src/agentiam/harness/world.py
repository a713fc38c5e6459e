"""All framework services wired onto one simulated clock.

A `World` owns the resolver, session authority, name registry, status
lists, policy set, and hash-chained audit log that a scenario runs
against.  Every random draw flows through one seeded generator and every
timestamp through one `SimClock`, so two worlds built from the same seed
produce byte-identical artifacts.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from ..ans import AnsQuery, AnsRegistry, ResolutionResponse
from ..audit import AuditLog, LogEntry
from ..credentials import (
    StatusListStore,
    StatusRef,
    VerifiableCredential,
    issue,
    issue_reputation,
    issue_tool_pass,
    new_status_list,
    revoke_index,
)
from ..crypto import KeyPair
from ..errors import InvalidInputError, NotFoundError
from ..identity import (
    AgentDid,
    CapabilityProfile,
    DidDocument,
    DidResolver,
    ToolGrant,
    VerificationMethod,
    generate_identity,
)
from ..policy import DEFAULT_RISK_RULES, PolicySet, RiskRule, load_policies
from ..sessions import GlobalSessionContext, SessionAuthority, SessionConfig
from .clock import SimClock

__all__ = ["Actor", "ToolStub", "World"]

_STATUS_LIST_SIZE = 64


@dataclass
class Actor:
    """One scripted participant: identity, keys, and issued credentials."""

    name: str
    did: str
    key: KeyPair
    document: DidDocument
    keys: dict[str, KeyPair]
    credentials: dict[str, VerifiableCredential] = field(default_factory=dict)
    session: Optional[GlobalSessionContext] = None

    def credential(self, label: str) -> VerifiableCredential:
        try:
            return self.credentials[label]
        except KeyError:
            raise NotFoundError(f"{self.name} holds no credential {label!r}") from None


@dataclass(frozen=True)
class ToolStub:
    """Canned tool endpoint: a fixed response per supported action."""

    tool_did: str
    tool_name: str
    responses: Mapping[str, Mapping[str, Any]]

    def respond(self, action: str) -> dict[str, Any]:
        try:
            return dict(self.responses[action])
        except KeyError:
            raise NotFoundError(f"{self.tool_name} has no action {action!r}") from None


class World:
    def __init__(
        self,
        seed: int,
        *,
        audit_path: Optional[Path] = None,
        audit_key: Optional[KeyPair] = None,
    ) -> None:
        self.seed = seed
        self.rng = random.Random(seed)
        self.clock = SimClock()
        self.resolver = DidResolver()
        self.status_store = StatusListStore()
        self.credentials: dict[str, VerifiableCredential] = {}

        _, self.registry_key, registry_doc = generate_identity(b"harness:ans-authority")
        self.resolver.register(registry_doc)
        self.registry = AnsRegistry(
            registry_doc,
            self.registry_key,
            self.resolver,
            credential_lookup=self.credentials.get,
            status_store=self.status_store,
        )

        self.sessions = SessionAuthority(self.resolver, SessionConfig())

        if audit_key is None:
            _, audit_key, audit_doc = generate_identity(b"harness:audit-authority")
            self.resolver.register(audit_doc)
        self.audit_key = audit_key
        self.audit = AuditLog(self.audit_key, path=audit_path)

        self.actors: dict[str, Actor] = {}
        self.adapters: dict[str, Any] = {}
        self.tools: dict[str, ToolStub] = {}
        self.resources: dict[str, Mapping[str, Any]] = {}
        self.policies: PolicySet = load_policies([])
        self.risk_rules: Sequence[RiskRule] = DEFAULT_RISK_RULES
        self.trusted_issuers: Optional[frozenset[str]] = None
        self.ans_names: dict[str, str] = {}
        self.lockouts: list[tuple[str, int]] = []
        self._status_lists: dict[str, tuple[str, int]] = {}
        self._message_counter = 0

    # -- deterministic inputs ---------------------------------------------

    def salt_source(self) -> bytes:
        return self.rng.randbytes(32)

    def next_message_id(self, prefix: str = "msg") -> str:
        self._message_counter += 1
        return f"{prefix}-{self._message_counter:04d}"

    # -- population ---------------------------------------------------------

    def add_actor(
        self,
        name: str,
        *,
        did: Optional[str] = None,
        scope: Sequence[str] = (),
        toolset: Sequence[ToolGrant] = (),
        extra_keys: Sequence[str] = (),
    ) -> Actor:
        """Create and register an identity.

        With ``did`` the actor uses that externally-rooted identifier;
        otherwise a fresh self-certifying DID is minted.  ``extra_keys``
        adds named verification methods beyond ``key-1``.
        """
        if name in self.actors:
            raise InvalidInputError(f"actor {name!r} already exists")
        seed = f"harness:{name}".encode("utf-8")
        now = self.clock.now
        if did is None:
            profile = CapabilityProfile(
                scope_of_behavior=tuple(scope), toolset=tuple(toolset)
            )
            _, key, document = generate_identity(seed, profile=profile, now=now)
            did_text = document.did.render()
        else:
            did_text = did
            key = KeyPair.from_seed(seed, key_id=f"{did_text}#key-1")
            parsed = AgentDid.parse(did_text)
            document = DidDocument(
                did=parsed,
                controller=parsed,
                verification_methods=(
                    VerificationMethod(key_id=key.key_id, public_key=key.public_key),
                ),
                service_endpoints=(),
                scope_of_behavior=tuple(scope),
                toolset=tuple(toolset),
                model_hash=b"\x00" * 32,
                created=now,
                updated=now,
            )
        keys = {"key-1": key}
        methods = list(document.verification_methods)
        for fragment in extra_keys:
            extra = KeyPair.from_seed(
                seed + b":" + fragment.encode("utf-8"),
                key_id=f"{did_text}#{fragment}",
            )
            keys[fragment] = extra
            methods.append(
                VerificationMethod(key_id=extra.key_id, public_key=extra.public_key)
            )
        document = replace(document, verification_methods=tuple(methods))
        self.resolver.register(document)
        actor = Actor(name=name, did=did_text, key=key, document=document, keys=keys)
        self.actors[name] = actor
        return actor

    def actor(self, name: str) -> Actor:
        try:
            return self.actors[name]
        except KeyError:
            raise NotFoundError(f"no actor named {name!r}") from None

    def register_tool(
        self, actor: Actor, tool_name: str, responses: Mapping[str, Mapping[str, Any]]
    ) -> ToolStub:
        stub = ToolStub(tool_did=actor.did, tool_name=tool_name, responses=dict(responses))
        self.tools[actor.did] = stub
        return stub

    def load_policy_documents(self, documents: Sequence[Any]) -> PolicySet:
        self.policies = load_policies(documents)
        return self.policies

    # -- credentials ----------------------------------------------------------

    def _status_slot(self, issuer: Actor) -> StatusRef:
        list_id = f"{issuer.did}/status/1"
        if list_id not in self._status_lists:
            status_list = new_status_list(
                list_id, issuer.document, issuer.key, _STATUS_LIST_SIZE
            )
            self.status_store.put(status_list)
            self._status_lists[list_id] = (issuer.name, 0)
        owner, next_index = self._status_lists[list_id]
        if next_index >= _STATUS_LIST_SIZE:
            raise InvalidInputError(f"status list {list_id!r} is full")
        self._status_lists[list_id] = (owner, next_index + 1)
        return StatusRef(status_list_id=list_id, index=next_index)

    def issue_credential(
        self,
        issuer: Actor,
        subject: Actor,
        *,
        label: str,
        types: Sequence[str],
        claims: Mapping[str, Any],
        valid_from: int,
        valid_until: Optional[int] = None,
        revocable: bool = False,
    ) -> VerifiableCredential:
        status_ref = self._status_slot(issuer) if revocable else None
        credential = issue(
            issuer.document,
            issuer.key,
            subject.did,
            types=tuple(types),
            claims=dict(claims),
            valid_from=valid_from,
            valid_until=valid_until,
            status_ref=status_ref,
            salt_source=self.salt_source,
        )
        self.credentials[credential.credential_id] = credential
        subject.credentials[label] = credential
        return credential

    def issue_tool_pass(
        self,
        issuer: Actor,
        subject: Actor,
        *,
        label: str,
        tool_did: str,
        allowed_actions: Sequence[str],
        job_id: str,
        input_handle: str,
        output_handle: str,
        valid_from: int,
        window_ticks: int = 15,
    ) -> VerifiableCredential:
        credential = issue_tool_pass(
            issuer.document,
            issuer.key,
            subject.did,
            tool_did=tool_did,
            allowed_actions=tuple(allowed_actions),
            job_id=job_id,
            input_handle=input_handle,
            output_handle=output_handle,
            valid_from=valid_from,
            window_ticks=window_ticks,
            salt_source=self.salt_source,
        )
        self.credentials[credential.credential_id] = credential
        subject.credentials[label] = credential
        return credential

    def issue_reputation(
        self,
        issuer: Actor,
        subject: Actor,
        *,
        label: str,
        rating: int,
        task_id: str,
        capability_context: str,
        comment: str,
        valid_from: int,
    ) -> VerifiableCredential:
        credential = issue_reputation(
            issuer.document,
            issuer.key,
            subject.did,
            rating=rating,
            task_id=task_id,
            capability_context=capability_context,
            comment=comment,
            valid_from=valid_from,
            salt_source=self.salt_source,
        )
        self.credentials[credential.credential_id] = credential
        subject.credentials[label] = credential
        return credential

    def revoke_credential(self, issuer: Actor, credential: VerifiableCredential) -> None:
        ref = credential.status_ref
        if ref is None:
            raise InvalidInputError(
                f"credential {credential.credential_id!r} has no revocation slot"
            )
        current = self.status_store.get(ref.status_list_id)
        self.status_store.put(revoke_index(current, ref.index, issuer.key))

    # -- sessions --------------------------------------------------------------

    def establish(self, actor: Actor, capabilities: Sequence[str]) -> GlobalSessionContext:
        context = self.sessions.establish_session(
            actor.did, tuple(capabilities), now=self.clock.now
        )
        actor.session = context
        return context

    def note_lockout(self, did: str, tick: int) -> None:
        self.lockouts.append((did, tick))

    # -- name service -------------------------------------------------------

    def ans_register(
        self,
        actor: Actor,
        ans_name: str,
        capabilities: Sequence[str],
        *,
        endpoint: Optional[str] = None,
        protocol_extensions: Optional[Mapping[str, Any]] = None,
        attestation_labels: Sequence[str] = (),
        live: bool = True,
    ) -> None:
        refs = [actor.credential(label).credential_id for label in attestation_labels]
        record = self.registry.register(
            ans_name,
            actor.did,
            endpoint or f"https://sim.invalid/{actor.name}",
            tuple(capabilities),
            protocol_extensions=protocol_extensions,
            attestation_refs=tuple(refs),
            live=live,
        )
        self.ans_names.setdefault(actor.did, record.ans_name.render())

    def ans_resolve(
        self,
        actor: Actor,
        query: AnsQuery,
        now: int,
        *,
        collaboration: Optional[Mapping[str, str]] = None,
    ) -> tuple[ResolutionResponse, LogEntry]:
        """Resolve on an agent's behalf and log the lookup.

        The logged outcome carries the queried capability so behavioral
        monitors can compare lookups against the agent's declared scope.
        """
        response = self.registry.resolve(query, now)
        outcome: dict[str, Any] = {
            "status": response.resolution_status,
            "agents": len(response.resolved_agents),
            "requiredCapability": query.required_capability,
        }
        if response.resolved_agents:
            outcome["first"] = response.resolved_agents[0]["agentDid"]
        entry = self.audit.append(
            agent_did=actor.did,
            action="AnsResolve",
            now=now,
            initiating_system="AgentNameService",
            agent_ans_name=self.ans_names.get(actor.did),
            input_parameters=query.to_value(),
            collaboration_context=dict(collaboration) if collaboration else None,
            outcome=outcome,
        )
        return response, entry
