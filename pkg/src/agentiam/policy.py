"""Default-deny policy evaluation over attribute paths.

Policies are conjunctions of predicates over a request context tree
(agent document, verified claims, resource attributes, action, session
context).  A request is allowed only when some policy's target applies
and every condition holds; everything else is denied with the first
failing predicate of each applicable policy reported back.

Predicates are positive and existential: a path may fan out over list
elements ("agent.vcs[].claims.role"), and the predicate holds when any
resolved value satisfies the operator.  A path that resolves to nothing
never satisfies anything, which keeps incomplete contexts on the deny
side by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional, Sequence

from .credentials import DisclosedCredential
from .errors import PolicyLoadError, SessionTerminatedError
from .identity import DidDocument, DidResolver

__all__ = [
    "PathRef",
    "Predicate",
    "PolicyDocument",
    "PolicySet",
    "AccessRequest",
    "Decision",
    "FailedPredicate",
    "RiskRule",
    "load_policies",
    "gather_attributes",
    "evaluate",
    "evaluate_with_risk",
    "resolve_path",
    "DEFAULT_TRANSACTION_THRESHOLD",
]

OPERATORS = ("equals", "memberOf", "containsType", "subsetOf", "atMost", "atLeast")

# Minor currency units; transactions strictly above this deny under
# reduced trust unless the escape predicate holds.
DEFAULT_TRANSACTION_THRESHOLD = 1_000_000


@dataclass(frozen=True)
class PathRef:
    """A predicate value read from the request context instead of a literal."""

    path: str

    def to_value(self) -> dict[str, Any]:
        return {"path": self.path}


def resolve_path(context: Any, path: str) -> list[Any]:
    """All values reachable along ``path``; "[]" fans out over a list."""
    current = [context]
    for part in path.split("."):
        fan_out = part.endswith("[]")
        key = part[:-2] if fan_out else part
        collected: list[Any] = []
        for item in current:
            if not isinstance(item, Mapping) or key not in item:
                continue
            value = item[key]
            if fan_out:
                if isinstance(value, (list, tuple)):
                    collected.extend(value)
            else:
                collected.append(value)
        current = collected
    return current


def _as_collection(value: Any, context: Any) -> list[Any]:
    if isinstance(value, PathRef):
        flattened: list[Any] = []
        for resolved in resolve_path(context, value.path):
            if isinstance(resolved, (list, tuple)):
                flattened.extend(resolved)
            else:
                flattened.append(resolved)
        return flattened
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


@dataclass(frozen=True)
class Predicate:
    attribute_path: str
    operator: str
    value: Any

    def holds(self, context: Any) -> bool:
        resolved = resolve_path(context, self.attribute_path)
        if self.operator == "equals":
            return any(item == self.value for item in resolved)
        if self.operator == "memberOf":
            collection = _as_collection(self.value, context)
            return any(item in collection for item in resolved)
        if self.operator == "containsType":
            return any(
                isinstance(item, Mapping) and self.value in item.get("types", ())
                for item in resolved
            )
        if self.operator == "subsetOf":
            collection = set(_as_collection(self.value, context))
            for item in resolved:
                members = set(item) if isinstance(item, (list, tuple)) else {item}
                if members <= collection:
                    return True
            return False
        if self.operator == "atMost":
            return any(
                isinstance(item, int) and not isinstance(item, bool) and item <= self.value
                for item in resolved
            )
        if self.operator == "atLeast":
            return any(
                isinstance(item, int) and not isinstance(item, bool) and item >= self.value
                for item in resolved
            )
        raise PolicyLoadError(f"unknown operator {self.operator!r}")

    def to_value(self) -> dict[str, Any]:
        value = self.value.to_value() if isinstance(self.value, PathRef) else self.value
        return {
            "attributePath": self.attribute_path,
            "operator": self.operator,
            "value": value,
        }

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "Predicate":
        raw = value["value"]
        if isinstance(raw, Mapping):
            if set(raw) != {"path"}:
                raise PolicyLoadError(f"predicate value {raw!r} is neither scalar nor path")
            raw = PathRef(raw["path"])
        elif isinstance(raw, list):
            raw = tuple(raw)
        return cls(
            attribute_path=value["attributePath"],
            operator=value["operator"],
            value=raw,
        )


@dataclass(frozen=True)
class PolicyDocument:
    policy_id: str
    target: tuple[Predicate, ...]
    conditions: tuple[Predicate, ...]
    obligations: tuple[str, ...] = ()

    def applies_to(self, context: Any) -> bool:
        return all(predicate.holds(context) for predicate in self.target)

    def to_value(self) -> dict[str, Any]:
        return {
            "policyId": self.policy_id,
            "target": [p.to_value() for p in self.target],
            "conditions": [p.to_value() for p in self.conditions],
            "obligations": list(self.obligations),
        }

    @classmethod
    def from_value(cls, value: Mapping[str, Any]) -> "PolicyDocument":
        return cls(
            policy_id=value["policyId"],
            target=tuple(Predicate.from_value(p) for p in value.get("target", ())),
            conditions=tuple(Predicate.from_value(p) for p in value["conditions"]),
            obligations=tuple(value.get("obligations", ())),
        )


@dataclass(frozen=True)
class PolicySet:
    policies: tuple[PolicyDocument, ...]  # policyId-ascending

    def to_value(self) -> list[dict[str, Any]]:
        return [p.to_value() for p in self.policies]


def _validate(policy: PolicyDocument) -> None:
    if not policy.conditions:
        raise PolicyLoadError(f"policy {policy.policy_id!r} has no conditions")
    for predicate in (*policy.target, *policy.conditions):
        if predicate.operator not in OPERATORS:
            raise PolicyLoadError(
                f"policy {policy.policy_id!r} uses unknown operator {predicate.operator!r}"
            )
        if predicate.operator in ("atMost", "atLeast") and not (
            isinstance(predicate.value, int) and not isinstance(predicate.value, bool)
        ):
            raise PolicyLoadError(
                f"policy {policy.policy_id!r}: {predicate.operator} needs an integer bound"
            )
        if predicate.operator in ("memberOf", "subsetOf") and not isinstance(
            predicate.value, (list, tuple, PathRef)
        ):
            raise PolicyLoadError(
                f"policy {policy.policy_id!r}: {predicate.operator} needs a collection or path"
            )


def load_policies(documents: Iterable[PolicyDocument | Mapping[str, Any]]) -> PolicySet:
    loaded: dict[str, PolicyDocument] = {}
    for document in documents:
        policy = (
            document
            if isinstance(document, PolicyDocument)
            else PolicyDocument.from_value(document)
        )
        _validate(policy)
        if policy.policy_id in loaded:
            raise PolicyLoadError(f"duplicate policyId {policy.policy_id!r}")
        loaded[policy.policy_id] = policy
    return PolicySet(policies=tuple(loaded[k] for k in sorted(loaded)))


# ── requests ─────────────────────────────────────────────────────────────

_TERMINATED_PREFIX = "TERMINATED"


@dataclass(frozen=True)
class AccessRequest:
    agent_did: str
    did_document: Optional[DidDocument]
    presented_credentials: tuple[DisclosedCredential, ...]
    resource: Mapping[str, Any]
    action: str
    context: Mapping[str, Any]

    def to_context(self) -> dict[str, Any]:
        vcs = [
            {
                "id": c.credential_id,
                "types": list(c.types),
                "issuer": c.issuer,
                "subject": c.subject,
                "claims": dict(c.claims),
            }
            for c in self.presented_credentials
        ]
        return {
            "agent": {
                "did": self.agent_did,
                "didDocument": self.did_document.to_value() if self.did_document else {},
                "vcs": vcs,
            },
            "resource": dict(self.resource),
            "action": self.action,
            "context": dict(self.context),
        }


def gather_attributes(
    resolver: DidResolver,
    resource_catalog: Mapping[str, Mapping[str, Any]],
    *,
    agent_did: str,
    credentials: Sequence[DisclosedCredential] = (),
    resource_id: str,
    action: str,
    session: Optional[Mapping[str, Any]] = None,
    resource_params: Optional[Mapping[str, Any]] = None,
    tick: int = 0,
    context_extra: Optional[Mapping[str, Any]] = None,
) -> AccessRequest:
    """Assemble the evaluation context for one request.

    Raises ResolutionFailureError for unknown DIDs and
    SessionTerminatedError when the agent's global session is ended;
    unknown resources simply contribute no tags.
    """
    document = resolver.resolve(agent_did)

    catalog_entry = resource_catalog.get(resource_id, {})
    resource: dict[str, Any] = {"id": resource_id, "tags": dict(catalog_entry.get("tags", {}))}
    for key, value in catalog_entry.items():
        if key != "tags":
            resource[key] = value
    for key, value in (resource_params or {}).items():
        resource[key] = value

    context: dict[str, Any] = {"tick": tick}
    if session is not None:
        status = session.get("sessionStatus")
        if session.get("terminated") or (
            isinstance(status, str) and status.startswith(_TERMINATED_PREFIX)
        ):
            raise SessionTerminatedError(f"session for {agent_did} is terminated")
        context["sessionStatus"] = status
        if "trustScore" in session:
            context["trustScore"] = session["trustScore"]
    context.update(context_extra or {})

    return AccessRequest(
        agent_did=agent_did,
        did_document=document,
        presented_credentials=tuple(credentials),
        resource=resource,
        action=action,
        context=context,
    )


# ── decisions ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class FailedPredicate:
    policy_id: str
    predicate: Predicate

    def to_value(self) -> dict[str, Any]:
        return {"policyId": self.policy_id, "predicate": self.predicate.to_value()}


@dataclass(frozen=True)
class Decision:
    outcome: str  # allow | deny
    matched_policy_id: Optional[str] = None
    failed_predicates: tuple[FailedPredicate, ...] = ()
    obligations: tuple[str, ...] = ()

    @property
    def allowed(self) -> bool:
        return self.outcome == "allow"

    def to_value(self) -> dict[str, Any]:
        return {
            "outcome": self.outcome,
            "matchedPolicyId": self.matched_policy_id,
            "failedPredicates": [f.to_value() for f in self.failed_predicates],
            "obligations": list(self.obligations),
        }


def evaluate(request: AccessRequest, policy_set: PolicySet) -> Decision:
    context = request.to_context()
    failures: list[FailedPredicate] = []
    for policy in policy_set.policies:
        if not policy.applies_to(context):
            continue
        failed = next((c for c in policy.conditions if not c.holds(context)), None)
        if failed is None:
            return Decision(
                outcome="allow",
                matched_policy_id=policy.policy_id,
                obligations=policy.obligations,
            )
        failures.append(FailedPredicate(policy.policy_id, failed))
    return Decision(outcome="deny", failed_predicates=tuple(failures))


@dataclass(frozen=True)
class RiskRule:
    """Session-status-conditioned tightening applied after normal evaluation."""

    rule_id: str
    session_status: str
    amount_path: str = "context.amount"
    amount_threshold: int = DEFAULT_TRANSACTION_THRESHOLD
    escape_predicate: Optional[Predicate] = None
    obligations: tuple[str, ...] = (
        "require_multi_factor_agent_auth",
        "limit_transaction_value",
    )


DEFAULT_RISK_RULES = (
    RiskRule(
        rule_id="risk.reduced_trust#limit",
        session_status="ReducedTrust",
        escape_predicate=Predicate("context.controllerApproval", "equals", True),
    ),
)


def evaluate_with_risk(
    request: AccessRequest,
    policy_set: PolicySet,
    risk_rules: Sequence[RiskRule] = DEFAULT_RISK_RULES,
) -> Decision:
    decision = evaluate(request, policy_set)
    if not decision.allowed:
        return decision
    context = request.to_context()
    status = request.context.get("sessionStatus")
    for rule in risk_rules:
        if status != rule.session_status:
            continue
        amounts = [
            a for a in resolve_path(context, rule.amount_path)
            if isinstance(a, int) and not isinstance(a, bool)
        ]
        over_limit = any(a > rule.amount_threshold for a in amounts)
        if over_limit and not (
            rule.escape_predicate is not None and rule.escape_predicate.holds(context)
        ):
            limit = Predicate(rule.amount_path, "atMost", rule.amount_threshold)
            return Decision(
                outcome="deny",
                failed_predicates=(FailedPredicate(rule.rule_id, limit),),
            )
        decision = Decision(
            outcome="allow",
            matched_policy_id=decision.matched_policy_id,
            obligations=tuple(dict.fromkeys((*decision.obligations, *rule.obligations))),
        )
    return decision
