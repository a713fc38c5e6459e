"""Baseline behavioral monitor over the audit log.

Compares what an agent actually did in a tick window against what its
document declares: scope of behavior bounds name-service lookups, the
toolset bounds tool invocations, and an optional issuer allowlist bounds
whose credentials it presents.  Each deviation carries a fixed trust
penalty that the session authority applies; a sufficient drop moves the
session into reduced trust, which the risk layer of the policy engine
then acts on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

from ..audit import LogEntry
from ..identity import DidDocument
from ..sessions import GlobalSessionContext, SessionAuthority

__all__ = [
    "ANOMALY_TRUST_DELTAS",
    "Anomaly",
    "apply_anomalies",
    "baseline_monitor",
]

ANOMALY_TRUST_DELTAS = {
    "scope-deviation": -15,
    "toolset-violation": -10,
    "untrusted-issuer": -20,
}


@dataclass(frozen=True)
class Anomaly:
    kind: str
    agent_did: str
    tick: int
    event_id: str
    detail: str

    def to_value(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "agentDid": self.agent_did,
            "tick": self.tick,
            "eventId": self.event_id,
            "detail": self.detail,
        }


def _scope_covers(scope: Sequence[str], capability: str) -> bool:
    # Prefix relation in either direction: querying a broader or narrower
    # facet of a declared capability is still in character.
    return any(
        declared == capability
        or capability.startswith(declared + ".")
        or declared.startswith(capability + ".")
        for declared in scope
    )


def baseline_monitor(
    entries: Iterable[LogEntry],
    document: DidDocument,
    *,
    agent_did: str,
    window: tuple[int, int],
    trusted_issuers: Optional[Iterable[str]] = None,
) -> tuple[Anomaly, ...]:
    """Scan one agent's entries in ``window`` (inclusive) for deviations.

    Attempts count as behavior whether or not they were allowed; a denied
    call to a forbidden tool is exactly the signal being looked for.
    """
    lo, hi = window
    scope = document.scope_of_behavior
    granted_tools = {g.tool_did for g in document.toolset if g.tool_did}
    granted_names = {g.tool_name for g in document.toolset}
    trusted = frozenset(trusted_issuers) if trusted_issuers is not None else None

    anomalies: list[Anomaly] = []
    for entry in entries:
        if entry.agent_did != agent_did or not lo <= entry.tick <= hi:
            continue
        outcome = entry.outcome

        if entry.action_performed == "AnsResolve" and scope:
            capability = outcome.get("requiredCapability")
            if isinstance(capability, str) and not _scope_covers(scope, capability):
                anomalies.append(
                    Anomaly(
                        kind="scope-deviation",
                        agent_did=agent_did,
                        tick=entry.tick,
                        event_id=entry.event_id,
                        detail=f"lookup for {capability!r} outside declared scope",
                    )
                )

        if entry.action_performed == "McpInvoke":
            tool_did = outcome.get("toolDid")
            tool_name = outcome.get("toolName")
            if tool_did not in granted_tools and tool_name not in granted_names:
                anomalies.append(
                    Anomaly(
                        kind="toolset-violation",
                        agent_did=agent_did,
                        tick=entry.tick,
                        event_id=entry.event_id,
                        detail=f"invoked {tool_did!r} absent from declared toolset",
                    )
                )

        if trusted is not None:
            for issuer in outcome.get("issuers", ()):
                if issuer not in trusted:
                    anomalies.append(
                        Anomaly(
                            kind="untrusted-issuer",
                            agent_did=agent_did,
                            tick=entry.tick,
                            event_id=entry.event_id,
                            detail=f"presented credential from {issuer!r}",
                        )
                    )
    return tuple(anomalies)


def apply_anomalies(
    authority: SessionAuthority, anomalies: Sequence[Anomaly], now: int
) -> list[GlobalSessionContext]:
    """Apply each anomaly's trust penalty; returns the final contexts."""
    updated: list[GlobalSessionContext] = []
    for anomaly in anomalies:
        updated = authority.update_trust(
            anomaly.agent_did,
            delta=ANOMALY_TRUST_DELTAS[anomaly.kind],
            reason=anomaly.kind,
            now=now,
        )
    return updated
