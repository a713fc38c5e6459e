"""Protocol adapters wrapped by the enforcement middleware.

Every message and tool call enters through an adapter, and the adapter
runs one fixed pipeline: verify signatures, verify presented
credentials, consult the adapter's local session view, evaluate policy,
then append an audit entry.  Each stage that fails produces a deny with
a reason naming that stage's fault, and the audit entry is written
whether or not delivery happened.

Adapters learn session state by pulling from the session authority
every ``pull_interval`` ticks, so a global logout propagates to an
adapter within one pull interval rather than instantly.  That lag is
deliberate: it models enforcement points distributed across processes,
and scenarios measure it as the revocation time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Mapping, Optional

from ..audit import LINK_KEYS, LogEntry
from ..canonical import canonical_bytes, canonical_loads
from ..credentials import (
    DisclosedCredential,
    VerifiableCredential,
    verify_credential,
    verify_presentation,
)
from ..crypto import verify as verify_raw
from ..errors import (
    IamError,
    InvalidInputError,
    KeyNotFoundError,
    NotFoundError,
    ReplayDetectedError,
    ResolutionFailureError,
    SessionTerminatedError,
)
from ..identity import LifecycleStatus
from ..policy import Decision, evaluate_with_risk, gather_attributes
from ..sessions import SessionStatus
from .messages import A2AMessage, McpCall

if TYPE_CHECKING:
    from .world import World

__all__ = [
    "JIT_BINDING_RULE_ID",
    "PIPELINE_STAGES",
    "EnforcedResult",
    "ProtocolAdapter",
    "RequestFacts",
    "default_request_facts",
    "mcp_invoke",
]

PIPELINE_STAGES = ("signature", "presentation", "session", "policy")

# Synthetic rule id recorded when a short-lived tool pass, rather than a
# standing policy, is what authorized the call.
JIT_BINDING_RULE_ID = "jit.tool_pass#binding"

_TERMINAL_STATUS = (
    SessionStatus.TERMINATED.value,
    SessionStatus.SECURITY_LOCKOUT.value,
)

_DECOMMISSIONED = (LifecycleStatus.REVOKED, LifecycleStatus.ARCHIVED)


@dataclass(frozen=True)
class RequestFacts:
    """What a message asks for, in policy-evaluation terms."""

    action: str
    resource_id: str
    resource_params: Mapping[str, Any] = field(default_factory=dict)
    context: Mapping[str, Any] = field(default_factory=dict)


def default_request_facts(message: A2AMessage) -> RequestFacts:
    payload = message.payload
    return RequestFacts(
        action=str(payload.get("requestedAction", "DeliverMessage")),
        resource_id=str(payload.get("resourceId", message.recipient_did)),
    )


@dataclass(frozen=True)
class EnforcedResult:
    """Outcome of one pipeline run: the verdict plus its audit entry."""

    delivered: bool
    stage: str  # deny stage, or "delivered"
    reason: Optional[str]
    decision: Optional[Decision]
    entry: LogEntry
    response: Optional[Mapping[str, Any]] = None

    def observed(self) -> dict[str, Any]:
        """Compact verdict used by scenario step expectations."""
        if self.delivered:
            value: dict[str, Any] = {"decision": "deliver", "stage": "delivered"}
            if self.decision is not None:
                value["policyId"] = self.decision.matched_policy_id
                value["obligations"] = list(self.decision.obligations)
            else:
                value["policyId"] = JIT_BINDING_RULE_ID
            if self.response is not None:
                value["response"] = dict(self.response)
            return value
        value = {"decision": "deny", "stage": self.stage, "reason": self.reason}
        if self.decision is not None:
            value["failedPredicates"] = [
                [f.policy_id, f.predicate.attribute_path, f.predicate.operator]
                for f in self.decision.failed_predicates
            ]
        return value


def _collaboration(payload: Mapping[str, Any]) -> Optional[dict[str, str]]:
    found = {
        key: payload[key]
        for key in LINK_KEYS
        if isinstance(payload.get(key), str) and payload[key]
    }
    return found or None


class ProtocolAdapter:
    """One enforcement point; `deliver` and `invoke` are the only ways in."""

    def __init__(
        self,
        world: "World",
        adapter_id: str,
        protocol: str,
        *,
        pull_interval: int = 1,
        request_mapper: Optional[Callable[[A2AMessage], RequestFacts]] = None,
        require_presentation: bool = False,
    ) -> None:
        if pull_interval < 1:
            raise InvalidInputError("pull interval must be at least one tick")
        self.world = world
        self.adapter_id = adapter_id
        self.protocol = protocol
        self.pull_interval = pull_interval
        self.require_presentation = require_presentation
        self._mapper = request_mapper or default_request_facts
        self._session_ids: dict[str, str] = {}
        self._views: dict[str, dict[str, Any]] = {}
        self._closed: set[str] = set()
        self._last_pull = 0
        self._terminated_seen: dict[str, int] = {}
        self._delivered: list[tuple[int, str]] = []

    # -- session synchronization ------------------------------------------

    def bind(self, actor: Any, now: int) -> None:
        if actor.session is None:
            raise SessionTerminatedError(f"{actor.name} has no established session")
        local_id = f"{self.adapter_id}/{actor.name}"
        self.world.sessions.bind(
            actor.session.global_session_id, self.adapter_id, local_id, now
        )
        self._session_ids[actor.did] = actor.session.global_session_id
        self._refresh(actor.did, now)

    def _refresh(self, did: str, now: int) -> None:
        status, capabilities, trust = self.world.sessions.sss_check(
            self._session_ids[did], now
        )
        terminated = status in _TERMINAL_STATUS
        self._views[did] = {
            "sessionStatus": status,
            "trustScore": trust,
            "capabilitySet": list(capabilities),
            "terminated": terminated,
        }
        if terminated and did not in self._terminated_seen:
            self._terminated_seen[did] = now
            self._closed.add(did)

    def maybe_pull(self, now: int) -> bool:
        if now - self._last_pull >= self.pull_interval:
            self.pull(now)
            return True
        return False

    def pull(self, now: int) -> None:
        self._last_pull = now
        for did in sorted(self._session_ids):
            self._refresh(did, now)

    def session_view(self, did: str) -> Optional[Mapping[str, Any]]:
        return self._views.get(did)

    def terminated_seen_at(self, did: str) -> Optional[int]:
        return self._terminated_seen.get(did)

    @property
    def deliveries(self) -> tuple[tuple[int, str], ...]:
        return tuple(self._delivered)

    # -- the enforcement pipeline ------------------------------------------

    def deliver(self, message: A2AMessage, now: int) -> EnforcedResult:
        facts = self._facts(message)
        verdict = self._enforce(message, facts, now)
        return self._record(message, facts, now, *verdict)

    def _facts(self, message: A2AMessage) -> RequestFacts:
        try:
            return self._mapper(message)
        except Exception:
            return default_request_facts(message)

    def _enforce(
        self, message: A2AMessage, facts: RequestFacts, now: int
    ) -> tuple[bool, str, Optional[str], Optional[Decision], list[DisclosedCredential]]:
        def deny(stage, reason, decision=None, creds=()):
            return False, stage, reason, decision, list(creds)

        # Stage 1: the transport signature and any payload signature must
        # check out against keys the sender's document actually lists.
        try:
            sender_doc = self.world.resolver.resolve(message.sender_did)
        except ResolutionFailureError:
            return deny("signature", "unknown-sender")
        if sender_doc.lifecycle_status in _DECOMMISSIONED:
            return deny("signature", "sender-decommissioned")
        checks = [(message.message_signature, message.signed_body(), "bad-message-signature")]
        if message.payload_signature is not None:
            checks.append(
                (message.payload_signature, dict(message.payload), "bad-payload-signature")
            )
        for proof, body, fault in checks:
            try:
                method = sender_doc.method_for(proof.key_id)
            except KeyNotFoundError:
                return deny("signature", "unknown-key")
            if not verify_raw(method.public_key, canonical_bytes(body), proof.signature):
                return deny("signature", fault)

        # Stage 2: presentations, bound to this message id as the nonce.
        if self.require_presentation and not message.presentations:
            return deny("presentation", "missing-presentation")
        disclosed: list[DisclosedCredential] = []
        for presentation in message.presentations:
            if presentation.holder != message.sender_did:
                return deny("presentation", "holder-mismatch")
            try:
                result, credentials = verify_presentation(
                    presentation,
                    self.world.resolver,
                    self.world.status_store,
                    now,
                    nonce=message.message_id.encode("utf-8"),
                    trusted_issuers=self.world.trusted_issuers,
                )
            except ReplayDetectedError:
                return deny("presentation", "replay-detected")
            except ResolutionFailureError:
                return deny("presentation", "unknown-issuer")
            if not result.valid:
                reasons = sorted({r.value for r in result.reasons})
                return deny("presentation", "+".join(reasons))
            disclosed.extend(credentials)

        # Stage 3: this adapter's own session view, however stale.
        view = self._views.get(message.sender_did)
        if view is None:
            return deny("session", "no-session", creds=disclosed)
        if view["terminated"]:
            self._closed.add(message.sender_did)
            return deny("session", "terminated", creds=disclosed)

        # Stage 4: attribute gathering and risk-aware policy evaluation.
        try:
            request = gather_attributes(
                self.world.resolver,
                self.world.resources,
                agent_did=message.sender_did,
                credentials=tuple(disclosed),
                resource_id=facts.resource_id,
                action=facts.action,
                session=view,
                resource_params=facts.resource_params,
                tick=now,
                context_extra=facts.context,
            )
        except SessionTerminatedError:
            self._closed.add(message.sender_did)
            return deny("session", "terminated", creds=disclosed)
        decision = evaluate_with_risk(request, self.world.policies, self.world.risk_rules)
        if not decision.allowed:
            if not decision.failed_predicates:
                reason = "no-applicable-policy"
            elif all(f.policy_id.startswith("risk.") for f in decision.failed_predicates):
                reason = "risk-limit"
            else:
                reason = "conditions-not-met"
            return deny("policy", reason, decision, disclosed)
        return True, "delivered", None, decision, disclosed

    def _record(
        self,
        message: A2AMessage,
        facts: RequestFacts,
        now: int,
        delivered: bool,
        stage: str,
        reason: Optional[str],
        decision: Optional[Decision],
        disclosed: list[DisclosedCredential],
    ) -> EnforcedResult:
        outcome: dict[str, Any] = {
            "status": "deliver" if delivered else "deny",
            "stage": stage,
            "messageId": message.message_id,
        }
        if reason is not None:
            outcome["reason"] = reason
        issuers = sorted({c.issuer for c in disclosed})
        if issuers:
            outcome["issuers"] = issuers
        policy_id = None
        if decision is not None:
            policy_id = decision.matched_policy_id or (
                decision.failed_predicates[0].policy_id
                if decision.failed_predicates
                else None
            )
        entry = self.world.audit.append(
            agent_did=message.sender_did,
            action=facts.action,
            now=now,
            initiating_system=f"AdapterEnforcementMiddleware/{self.adapter_id}",
            agent_ans_name=self.world.ans_names.get(message.sender_did),
            target_resource_did=message.recipient_did,
            target_resource_ans_name=self.world.ans_names.get(message.recipient_did),
            input_parameters=dict(message.payload),
            presented_vc_ids=tuple(c.credential_id for c in disclosed),
            decision_policy_id=policy_id,
            collaboration_context=_collaboration(message.payload),
            outcome=outcome,
        )
        if delivered:
            self._delivered.append((now, message.message_id))
        return EnforcedResult(
            delivered=delivered,
            stage=stage,
            reason=reason,
            decision=decision,
            entry=entry,
        )

    # -- tool calls --------------------------------------------------------

    def invoke(self, call: McpCall, now: int) -> EnforcedResult:
        return mcp_invoke(self, call, now)


def _parse_tool_pass(wire: str) -> Optional[VerifiableCredential]:
    try:
        return VerifiableCredential.from_value(canonical_loads(wire))
    except (IamError, KeyError, TypeError, ValueError):
        return None


def _tool_call_verdict(
    adapter: ProtocolAdapter,
    call: McpCall,
    credential: Optional[VerifiableCredential],
    now: int,
) -> tuple[bool, str, Optional[str]]:
    world = adapter.world
    try:
        caller_doc = world.resolver.resolve(call.agent_did)
    except ResolutionFailureError:
        return False, "signature", "unknown-sender"
    if caller_doc.lifecycle_status in _DECOMMISSIONED:
        return False, "signature", "sender-decommissioned"
    if credential is None:
        return False, "signature", "bad-credential-encoding"

    result = verify_credential(
        credential, world.resolver, world.status_store, now, world.trusted_issuers
    )
    if not result.valid:
        return False, "presentation", "+".join(sorted({r.value for r in result.reasons}))
    if credential.subject != call.agent_did:
        return False, "presentation", "subject-mismatch"

    view = adapter.session_view(call.agent_did)
    if view is None:
        return False, "session", "no-session"
    if view["terminated"]:
        adapter._closed.add(call.agent_did)
        return False, "session", "terminated"

    claims = credential.claims
    bound = (
        claims.get("authorizedToolDID") == call.tool_did
        and claims.get("jobId") == call.job_id
        and claims.get("inputDataHandle") in (None, call.input_ref)
    )
    if not bound:
        return False, "policy", "binding-mismatch"
    if call.action not in tuple(claims.get("allowedActions", ())):
        return False, "policy", "action-not-allowed"
    return True, "delivered", None


def mcp_invoke(adapter: ProtocolAdapter, call: McpCall, now: int) -> EnforcedResult:
    """Run a tool call through the same pipeline shape as a message.

    The authorization artifact is the short-lived tool pass carried in
    call metadata; the policy stage checks its bindings (tool identity,
    job, input handle, permitted actions) instead of standing policy.
    """
    world = adapter.world
    if call.tool_did not in world.tools:
        raise NotFoundError(f"no tool registered at {call.tool_did}")
    tool = world.tools[call.tool_did]

    credential = _parse_tool_pass(call.credential_wire)
    delivered, stage, reason = _tool_call_verdict(adapter, call, credential, now)
    response = tool.respond(call.action) if delivered else None

    outcome: dict[str, Any] = {
        "status": "deliver" if delivered else "deny",
        "stage": stage,
        "toolDid": call.tool_did,
        "toolName": tool.tool_name,
        "jobId": call.job_id,
    }
    if reason is not None:
        outcome["reason"] = reason
    if credential is not None:
        outcome["issuers"] = [credential.issuer]
    entry = world.audit.append(
        agent_did=call.agent_did,
        action="McpInvoke",
        now=now,
        initiating_system=f"AdapterEnforcementMiddleware/{adapter.adapter_id}",
        agent_ans_name=world.ans_names.get(call.agent_did),
        target_resource_did=call.tool_did,
        target_resource_ans_name=world.ans_names.get(call.tool_did),
        input_parameters=call.request(),
        presented_vc_ids=(credential.credential_id,) if credential else (),
        decision_policy_id=JIT_BINDING_RULE_ID if delivered else None,
        outcome=outcome,
    )
    if delivered:
        adapter._delivered.append((now, call.job_id))
        world.audit.append(
            agent_did=call.tool_did,
            action="ToolResponse",
            now=now,
            initiating_system=tool.tool_name,
            agent_ans_name=world.ans_names.get(call.tool_did),
            target_resource_did=call.agent_did,
            outcome={**(response or {}), "jobId": call.job_id},
        )
    return EnforcedResult(
        delivered=delivered,
        stage=stage,
        reason=reason,
        decision=None,
        entry=entry,
        response=response,
    )
