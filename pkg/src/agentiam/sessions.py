"""Global session ledger: the single source of truth for session state.

One authority owns every global session context and serializes all writes;
enforcement points consult it (``sss_check``) on every intercepted request,
so a completed write is visible to the next check with no staleness.  Each
mutation appends a session event, and replaying a session's events rebuilds
its exact current state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

from .canonical import canonical_bytes, to_hex
from .crypto import sha3_256
from .errors import (
    ClockViolationError,
    ConflictError,
    IdentityRevokedError,
    InvalidInputError,
    LifecycleViolationError,
    NotFoundError,
    SessionTerminatedError,
)
from .identity import AgentDid, DidResolver, LifecycleStatus

__all__ = [
    "SessionStatus",
    "SessionConfig",
    "ProtocolSessionBinding",
    "SessionEvent",
    "GlobalSessionContext",
    "SessionAuthority",
    "replay_session",
]


class SessionStatus(str, Enum):
    ACTIVE = "active"
    REDUCED_TRUST = "ReducedTrust"
    TERMINATED = "terminated"
    SECURITY_LOCKOUT = "TERMINATED_IMMEDIATE_SECURITY_LOCKOUT"


_TERMINAL = frozenset({SessionStatus.TERMINATED, SessionStatus.SECURITY_LOCKOUT})

# Logout reason that escalates to the hard lockout status.
SECURITY_LOCKOUT_REASON = "security-lockout"


@dataclass(frozen=True)
class SessionConfig:
    initial_trust: int = 80
    reduced_trust_threshold: int = 60
    multi_session: bool = False


@dataclass(frozen=True)
class ProtocolSessionBinding:
    adapter_id: str
    local_session_id: str
    established_tick: int
    local_state: str = "open"  # open | closed

    def to_value(self) -> dict[str, Any]:
        return {
            "adapterId": self.adapter_id,
            "localSessionId": self.local_session_id,
            "establishedTick": self.established_tick,
            "localState": self.local_state,
        }


@dataclass(frozen=True)
class SessionEvent:
    kind: str  # established | bound | statusChanged | logout | trustUpdated
    global_session_id: str
    payload: Mapping[str, Any]
    tick: int
    sequence: int

    def to_value(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "globalSessionId": self.global_session_id,
            "payload": dict(self.payload),
            "tick": self.tick,
            "sequence": self.sequence,
        }


@dataclass(frozen=True)
class GlobalSessionContext:
    global_session_id: str
    agent_did: str
    status: SessionStatus
    capability_set: tuple[str, ...]
    trust_score: int
    created_tick: int
    last_transition_tick: int
    bindings: tuple[ProtocolSessionBinding, ...] = ()

    @property
    def terminated(self) -> bool:
        return self.status in _TERMINAL

    def binding_for(self, adapter_id: str, local_session_id: str) -> Optional[ProtocolSessionBinding]:
        for binding in self.bindings:
            if binding.adapter_id == adapter_id and binding.local_session_id == local_session_id:
                return binding
        return None

    def view(self) -> dict[str, Any]:
        """The shape the attribute gatherer consumes."""
        return {
            "globalSessionId": self.global_session_id,
            "sessionStatus": self.status.value,
            "trustScore": self.trust_score,
            "terminated": self.terminated,
            "capabilitySet": list(self.capability_set),
        }

    def to_value(self) -> dict[str, Any]:
        return {
            "globalSessionId": self.global_session_id,
            "agentDid": self.agent_did,
            "status": self.status.value,
            "capabilitySet": list(self.capability_set),
            "trustScore": self.trust_score,
            "createdTick": self.created_tick,
            "lastTransitionTick": self.last_transition_tick,
            "bindings": [b.to_value() for b in self.bindings],
        }


def _clamp(score: int) -> int:
    return max(0, min(100, score))


class SessionAuthority:
    """Session Authority plus its state synchronizer ledger.

    All writes pass through this object in program order; ``sss_check``
    reads the same ledger, giving read-after-write consistency.  Push
    subscribers are best-effort only; correctness never depends on them.
    """

    def __init__(self, resolver: DidResolver, config: SessionConfig = SessionConfig()) -> None:
        self._resolver = resolver
        self._config = config
        self._sessions: dict[str, GlobalSessionContext] = {}
        self._events: list[SessionEvent] = []
        self._sequence = 0
        self._counter = 0
        self._local_ids: set[tuple[str, str]] = set()
        self._subscribers: list[Callable[[SessionEvent], None]] = []

    @property
    def config(self) -> SessionConfig:
        return self._config

    # -- plumbing ----------------------------------------------------------

    def subscribe(self, callback: Callable[[SessionEvent], None]) -> None:
        self._subscribers.append(callback)

    def _emit(self, kind: str, session_id: str, payload: Mapping[str, Any], tick: int) -> None:
        event = SessionEvent(kind, session_id, dict(payload), tick, self._sequence)
        self._sequence += 1
        self._events.append(event)
        for callback in self._subscribers:
            try:
                callback(event)
            except Exception:  # push is advisory; pull remains the backstop
                continue

    def _store(self, context: GlobalSessionContext, now: int) -> GlobalSessionContext:
        previous = self._sessions.get(context.global_session_id)
        if previous is not None and now < previous.last_transition_tick:
            raise ClockViolationError(
                f"tick {now} precedes last transition {previous.last_transition_tick}"
            )
        updated = replace(context, last_transition_tick=now)
        self._sessions[updated.global_session_id] = updated
        return updated

    def get(self, session_id: str) -> GlobalSessionContext:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise NotFoundError(f"unknown session {session_id!r}") from None

    def sessions(self) -> list[GlobalSessionContext]:
        return list(self._sessions.values())

    def sessions_for(self, agent_did: AgentDid | str) -> list[GlobalSessionContext]:
        key = agent_did.render() if isinstance(agent_did, AgentDid) else agent_did
        return [s for s in self._sessions.values() if s.agent_did == key]

    def active_session_for(self, agent_did: AgentDid | str) -> Optional[GlobalSessionContext]:
        live = [s for s in self.sessions_for(agent_did) if not s.terminated]
        return live[0] if live else None

    def events(self, session_id: Optional[str] = None) -> tuple[SessionEvent, ...]:
        if session_id is None:
            return tuple(self._events)
        return tuple(e for e in self._events if e.global_session_id == session_id)

    def ledger_snapshot(self) -> list[dict[str, Any]]:
        return [self._sessions[k].to_value() for k in sorted(self._sessions)]

    # -- operations --------------------------------------------------------

    def establish_session(
        self, agent_did: AgentDid | str, capability_set: Iterable[str], now: int
    ) -> GlobalSessionContext:
        did_text = agent_did.render() if isinstance(agent_did, AgentDid) else agent_did
        document = self._resolver.resolve(did_text)
        if document.lifecycle_status in (LifecycleStatus.REVOKED, LifecycleStatus.ARCHIVED):
            raise IdentityRevokedError(f"{did_text} is {document.lifecycle_status.value}")
        if document.lifecycle_status is not LifecycleStatus.ACTIVE:
            raise LifecycleViolationError(f"{did_text} is {document.lifecycle_status.value}")
        if not self._config.multi_session and self.active_session_for(did_text) is not None:
            raise ConflictError(f"{did_text} already has a live session")

        self._counter += 1
        digest = to_hex(sha3_256(canonical_bytes([did_text, self._counter])))[:8]
        session_id = f"gs-{self._counter:06d}-{digest}"
        capabilities = tuple(sorted(set(capability_set)))
        context = GlobalSessionContext(
            global_session_id=session_id,
            agent_did=did_text,
            status=SessionStatus.ACTIVE,
            capability_set=capabilities,
            trust_score=self._config.initial_trust,
            created_tick=now,
            last_transition_tick=now,
        )
        self._sessions[session_id] = context
        self._emit(
            "established",
            session_id,
            {
                "agentDid": did_text,
                "capabilitySet": list(capabilities),
                "trustScore": context.trust_score,
            },
            now,
        )
        return context

    def bind(
        self, session_id: str, adapter_id: str, local_session_id: str, now: int
    ) -> ProtocolSessionBinding:
        context = self.get(session_id)
        if context.terminated:
            raise SessionTerminatedError(f"session {session_id} is {context.status.value}")
        if (adapter_id, local_session_id) in self._local_ids:
            raise ConflictError(f"{adapter_id} already bound {local_session_id!r}")
        binding = ProtocolSessionBinding(
            adapter_id=adapter_id,
            local_session_id=local_session_id,
            established_tick=now,
        )
        self._store(replace(context, bindings=(*context.bindings, binding)), now)
        self._local_ids.add((adapter_id, local_session_id))
        self._emit(
            "bound",
            session_id,
            {"adapterId": adapter_id, "localSessionId": local_session_id},
            now,
        )
        return binding

    def global_logout(
        self, target: AgentDid | str, reason: str, now: int
    ) -> list[GlobalSessionContext]:
        """End every session of the target; repeated calls are no-ops.

        ``target`` is a global session id or an agent DID.  The ledger
        closes all protocol bindings immediately; adapters holding local
        state converge at their next consultation.
        """
        key = target.render() if isinstance(target, AgentDid) else target
        if key in self._sessions:
            matched = [self._sessions[key]]
        else:
            matched = self.sessions_for(key)
        if not matched:
            raise NotFoundError(f"no session for {key!r}")

        status = (
            SessionStatus.SECURITY_LOCKOUT
            if reason == SECURITY_LOCKOUT_REASON
            else SessionStatus.TERMINATED
        )
        affected = []
        for context in matched:
            if context.terminated:
                affected.append(context)
                continue
            closed = tuple(replace(b, local_state="closed") for b in context.bindings)
            updated = self._store(
                replace(context, status=status, bindings=closed), now
            )
            self._emit(
                "logout",
                context.global_session_id,
                {"reason": reason, "status": status.value},
                now,
            )
            affected.append(updated)
        return affected

    def sss_check(self, session_id: str, now: int) -> tuple[str, tuple[str, ...], int]:
        context = self.get(session_id)
        return (context.status.value, context.capability_set, context.trust_score)

    def update_trust(
        self,
        agent_did: AgentDid | str,
        *,
        delta: Optional[int] = None,
        absolute: Optional[int] = None,
        reason: str = "",
        now: int,
    ) -> list[GlobalSessionContext]:
        if (delta is None) == (absolute is None):
            raise InvalidInputError("provide exactly one of delta or absolute")
        sessions = self.sessions_for(agent_did)
        if not sessions:
            raise NotFoundError(f"no session for {agent_did}")
        live = [s for s in sessions if not s.terminated]
        if not live:
            raise SessionTerminatedError(f"all sessions for {agent_did} are terminated")

        threshold = self._config.reduced_trust_threshold
        updated_sessions = []
        for context in live:
            score = _clamp(absolute if delta is None else context.trust_score + delta)
            updated = self._store(replace(context, trust_score=score), now)
            self._emit(
                "trustUpdated",
                context.global_session_id,
                {
                    "reason": reason,
                    "trustScore": score,
                    **({"delta": delta} if delta is not None else {"absolute": absolute}),
                },
                now,
            )
            new_status = updated.status
            if score < threshold and updated.status is SessionStatus.ACTIVE:
                new_status = SessionStatus.REDUCED_TRUST
            elif score >= threshold and updated.status is SessionStatus.REDUCED_TRUST:
                new_status = SessionStatus.ACTIVE
            if new_status is not updated.status:
                updated = self._store(replace(updated, status=new_status), now)
                self._emit(
                    "statusChanged",
                    context.global_session_id,
                    {"from": context.status.value, "to": new_status.value, "reason": reason},
                    now,
                )
            updated_sessions.append(updated)
        return updated_sessions


def replay_session(events: Sequence[SessionEvent]) -> GlobalSessionContext:
    """Rebuild a session context purely from its event stream."""
    context: Optional[GlobalSessionContext] = None
    for event in sorted(events, key=lambda e: (e.tick, e.sequence)):
        if event.kind == "established":
            context = GlobalSessionContext(
                global_session_id=event.global_session_id,
                agent_did=event.payload["agentDid"],
                status=SessionStatus.ACTIVE,
                capability_set=tuple(event.payload["capabilitySet"]),
                trust_score=event.payload["trustScore"],
                created_tick=event.tick,
                last_transition_tick=event.tick,
            )
            continue
        if context is None or event.global_session_id != context.global_session_id:
            raise NotFoundError("event stream does not start with establishment")
        if event.kind == "bound":
            binding = ProtocolSessionBinding(
                adapter_id=event.payload["adapterId"],
                local_session_id=event.payload["localSessionId"],
                established_tick=event.tick,
            )
            context = replace(context, bindings=(*context.bindings, binding))
        elif event.kind == "trustUpdated":
            context = replace(context, trust_score=event.payload["trustScore"])
        elif event.kind == "statusChanged":
            context = replace(context, status=SessionStatus(event.payload["to"]))
        elif event.kind == "logout":
            context = replace(
                context,
                status=SessionStatus(event.payload["status"]),
                bindings=tuple(replace(b, local_state="closed") for b in context.bindings),
            )
        else:
            raise NotFoundError(f"unknown event kind {event.kind!r}")
        context = replace(context, last_transition_tick=event.tick)
    if context is None:
        raise NotFoundError("empty event stream")
    return context
