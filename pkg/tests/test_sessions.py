"""Session authority: lifecycle, logout propagation, trust management."""

import random

import pytest

from agentiam.errors import (
    ClockViolationError,
    ConflictError,
    IdentityRevokedError,
    InvalidInputError,
    LifecycleViolationError,
    NotFoundError,
    SessionTerminatedError,
)
from agentiam.identity import (
    DidResolver,
    LifecycleStatus,
    deactivate,
    generate_identity,
    update_document,
)
from agentiam.policy import gather_attributes
from agentiam.sessions import (
    SECURITY_LOCKOUT_REASON,
    GlobalSessionContext,
    SessionAuthority,
    SessionConfig,
    SessionStatus,
    replay_session,
)


def _world(config=SessionConfig(), agents=3):
    resolver = DidResolver()
    identities = []
    for i in range(agents):
        did, key, document = generate_identity(f"session-agent-{i}".encode())
        resolver.register(document)
        identities.append((did, key, document))
    return resolver, SessionAuthority(resolver, config), identities


def test_establish_creates_active_context():
    _, authority, identities = _world()
    did = identities[0][0]
    context = authority.establish_session(did, ["analytics", "reporting"], now=10)
    assert context.global_session_id.startswith("gs-")
    assert context.status is SessionStatus.ACTIVE
    assert context.trust_score == 80
    assert context.capability_set == ("analytics", "reporting")
    assert context.bindings == ()
    assert context.created_tick == context.last_transition_tick == 10
    assert authority.sss_check(context.global_session_id, now=10) == (
        "active",
        ("analytics", "reporting"),
        80,
    )


def test_establish_gates_on_lifecycle():
    resolver, authority, identities = _world()
    did, key, document = identities[0]
    resolver.register(deactivate(document, key, now=1))
    with pytest.raises(IdentityRevokedError):
        authority.establish_session(did, [], now=2)

    did2, key2, document2 = identities[1]
    suspended = update_document(
        document2, {"lifecycleStatus": "suspended"}, key2, now=1
    )
    resolver.register(suspended)
    with pytest.raises(LifecycleViolationError):
        authority.establish_session(did2, [], now=2)


def test_single_session_config_conflicts_multi_allows():
    _, authority, identities = _world()
    did = identities[0][0]
    authority.establish_session(did, [], now=0)
    with pytest.raises(ConflictError):
        authority.establish_session(did, [], now=1)

    _, multi_authority, multi_identities = _world(SessionConfig(multi_session=True))
    did_m = multi_identities[0][0]
    first = multi_authority.establish_session(did_m, [], now=0)
    second = multi_authority.establish_session(did_m, [], now=0)
    assert first.global_session_id != second.global_session_id


def test_session_ids_unique_over_a_thousand():
    _, authority, identities = _world(SessionConfig(multi_session=True), agents=1)
    did = identities[0][0]
    ids = {
        authority.establish_session(did, [], now=i).global_session_id
        for i in range(1000)
    }
    assert len(ids) == 1000


def test_bind_two_adapters_then_guards():
    _, authority, identities = _world()
    did = identities[0][0]
    context = authority.establish_session(did, [], now=0)
    sid = context.global_session_id
    authority.bind(sid, "a2a-adapter-1", "a2a-local-9", now=1)
    authority.bind(sid, "mcp-adapter-1", "mcp-local-4", now=2)
    current = authority.get(sid)
    assert [b.adapter_id for b in current.bindings] == ["a2a-adapter-1", "mcp-adapter-1"]
    assert all(b.local_state == "open" for b in current.bindings)

    with pytest.raises(ConflictError):
        authority.bind(sid, "a2a-adapter-1", "a2a-local-9", now=3)

    authority.global_logout(sid, reason="user-initiated", now=4)
    with pytest.raises(SessionTerminatedError):
        authority.bind(sid, "acp-adapter-1", "acp-local-1", now=5)


def test_global_logout_closes_everything():
    _, authority, identities = _world()
    did = identities[0][0]
    context = authority.establish_session(did, ["pay"], now=0)
    sid = context.global_session_id
    authority.bind(sid, "a2a-adapter-1", "l1", now=1)
    authority.bind(sid, "mcp-adapter-1", "l2", now=1)

    affected = authority.global_logout(did.render(), reason="controller-request", now=5)
    assert [s.global_session_id for s in affected] == [sid]
    final = authority.get(sid)
    assert final.status is SessionStatus.TERMINATED
    assert all(b.local_state == "closed" for b in final.bindings)
    assert authority.sss_check(sid, now=5)[0] == "terminated"

    events_before = len(authority.events(sid))
    again = authority.global_logout(sid, reason="controller-request", now=6)
    assert [s.global_session_id for s in again] == [sid]
    assert len(authority.events(sid)) == events_before  # idempotent, no new events

    with pytest.raises(NotFoundError):
        authority.global_logout("gs-999999-deadbeef", reason="x", now=7)


def test_security_lockout_status():
    _, authority, identities = _world()
    did = identities[0][0]
    context = authority.establish_session(did, [], now=0)
    authority.global_logout(did.render(), reason=SECURITY_LOCKOUT_REASON, now=1)
    status, _, _ = authority.sss_check(context.global_session_id, now=1)
    assert status == "TERMINATED_IMMEDIATE_SECURITY_LOCKOUT"
    view = authority.get(context.global_session_id).view()
    assert view["terminated"] is True


def test_trust_anomalies_cross_into_reduced_trust():
    _, authority, identities = _world()
    did = identities[0][0]
    context = authority.establish_session(did, [], now=0)
    sid = context.global_session_id

    updated = authority.update_trust(did, delta=-15, reason="scope-deviation", now=1)
    assert updated[0].trust_score == 65
    assert updated[0].status is SessionStatus.ACTIVE

    updated = authority.update_trust(did, delta=-10, reason="toolset-violation", now=2)
    assert updated[0].trust_score == 55
    assert updated[0].status is SessionStatus.REDUCED_TRUST
    assert authority.sss_check(sid, now=2)[0] == "ReducedTrust"

    updated = authority.update_trust(did, delta=+10, reason="clean-audit", now=3)
    assert updated[0].trust_score == 65
    assert updated[0].status is SessionStatus.ACTIVE

    kinds = [e.kind for e in authority.events(sid)]
    assert kinds == [
        "established",
        "trustUpdated",
        "trustUpdated",
        "statusChanged",
        "trustUpdated",
        "statusChanged",
    ]


def test_trust_clamps_and_argument_guards():
    _, authority, identities = _world()
    did = identities[0][0]
    authority.establish_session(did, [], now=0)
    assert authority.update_trust(did, delta=-200, now=1)[0].trust_score == 0
    assert authority.update_trust(did, delta=+400, now=2)[0].trust_score == 100
    assert authority.update_trust(did, absolute=30, now=3)[0].status is (
        SessionStatus.REDUCED_TRUST
    )
    with pytest.raises(InvalidInputError):
        authority.update_trust(did, now=4)
    with pytest.raises(InvalidInputError):
        authority.update_trust(did, delta=1, absolute=1, now=4)
    with pytest.raises(NotFoundError):
        authority.update_trust("did:com:ghost:agent", delta=1, now=4)
    authority.global_logout(did.render(), reason="done", now=5)
    with pytest.raises(SessionTerminatedError):
        authority.update_trust(did, delta=1, now=6)


def test_trust_fold_matches_oracle():
    rng = random.Random(99)
    for trial in range(60):
        _, authority, identities = _world(agents=1)
        did = identities[0][0]
        authority.establish_session(did, [], now=0)
        score = 80
        for step in range(rng.randint(1, 12)):
            if rng.random() < 0.7:
                delta = rng.randint(-60, 40)
                result = authority.update_trust(did, delta=delta, now=step + 1)
                score = max(0, min(100, score + delta))
            else:
                absolute = rng.randint(-20, 120)
                result = authority.update_trust(did, absolute=absolute, now=step + 1)
                score = max(0, min(100, absolute))
            assert result[0].trust_score == score
            expected_status = (
                SessionStatus.REDUCED_TRUST if score < 60 else SessionStatus.ACTIVE
            )
            assert result[0].status is expected_status


def test_terminated_sessions_absorb_everything():
    _, authority, identities = _world()
    did = identities[0][0]
    for reason, status in [
        ("user-initiated", SessionStatus.TERMINATED),
        (SECURITY_LOCKOUT_REASON, SessionStatus.SECURITY_LOCKOUT),
    ]:
        context = authority.establish_session(did, [], now=0)
        sid = context.global_session_id
        authority.global_logout(sid, reason=reason, now=1)
        assert authority.get(sid).status is status
        with pytest.raises(SessionTerminatedError):
            authority.bind(sid, "a", "l", now=2)
        with pytest.raises(SessionTerminatedError):
            authority.update_trust(did, delta=5, now=2)
        # repeated logout keeps the original terminal status
        authority.global_logout(sid, reason="user-initiated", now=3)
        assert authority.get(sid).status is status
        # a terminated session no longer blocks a fresh one
    assert authority.active_session_for(did) is None


def test_clock_regression_rejected():
    _, authority, identities = _world()
    did = identities[0][0]
    context = authority.establish_session(did, [], now=10)
    authority.bind(context.global_session_id, "a2a", "l", now=12)
    with pytest.raises(ClockViolationError):
        authority.update_trust(did, delta=-1, now=11)


def test_view_feeds_attribute_gathering():
    resolver, authority, identities = _world()
    did = identities[0][0]
    context = authority.establish_session(did, [], now=0)
    request = gather_attributes(
        resolver,
        {},
        agent_did=did.render(),
        resource_id="R",
        action="PING",
        session=authority.get(context.global_session_id).view(),
        tick=1,
    )
    assert request.context["sessionStatus"] == "active"
    assert request.context["trustScore"] == 80

    authority.global_logout(did.render(), reason=SECURITY_LOCKOUT_REASON, now=2)
    with pytest.raises(SessionTerminatedError):
        gather_attributes(
            resolver,
            {},
            agent_did=did.render(),
            resource_id="R",
            action="PING",
            session=authority.get(context.global_session_id).view(),
            tick=3,
        )


def test_random_histories_stay_consistent_and_replayable():
    rng = random.Random(0xBEEF)
    resolver, authority, identities = _world(SessionConfig(multi_session=True), agents=4)
    dids = [i[0] for i in identities]

    class Model:
        def __init__(self):
            self.sessions = {}  # sid -> dict(status, caps, trust)

    model = Model()
    tick = 0
    local_counter = 0
    for _ in range(1000):
        tick += rng.randint(0, 2)
        op = rng.random()
        did = rng.choice(dids)
        sids = [s for s, m in model.sessions.items() if m["did"] == did.render()]
        live = [s for s in sids if m_status(model, s) not in ("terminated", "TERMINATED_IMMEDIATE_SECURITY_LOCKOUT")]
        if op < 0.2 or not sids:
            context = authority.establish_session(did, ["cap"], now=tick)
            model.sessions[context.global_session_id] = {
                "did": did.render(),
                "status": "active",
                "trust": 80,
            }
        elif op < 0.4 and live:
            sid = rng.choice(live)
            local_counter += 1
            authority.bind(sid, "a2a-adapter-1", f"l{local_counter}", now=tick)
        elif op < 0.65 and live:
            delta = rng.randint(-40, 30)
            authority.update_trust(did, delta=delta, now=tick)
            for sid in live:
                entry = model.sessions[sid]
                entry["trust"] = max(0, min(100, entry["trust"] + delta))
                entry["status"] = "ReducedTrust" if entry["trust"] < 60 else "active"
        elif op < 0.75 and live:
            authority.global_logout(did.render(), reason="rotate", now=tick)
            for sid in live:
                model.sessions[sid]["status"] = "terminated"
        else:
            sid = rng.choice(sids)
            status, _, trust = authority.sss_check(sid, now=tick)
            assert status == model.sessions[sid]["status"], sid
            assert trust == model.sessions[sid]["trust"], sid

        for session in authority.sessions():  # ledger-wide structural invariant
            if any(b.local_state == "open" for b in session.bindings):
                assert not session.terminated

    for session in authority.sessions():
        assert replay_session(authority.events(session.global_session_id)) == session


def m_status(model, sid):
    return model.sessions[sid]["status"]


def test_ledger_snapshot_is_canonical_friendly():
    from agentiam.canonical import canonical_bytes

    _, authority, identities = _world()
    did = identities[0][0]
    context = authority.establish_session(did, ["x"], now=0)
    authority.bind(context.global_session_id, "a2a", "l1", now=1)
    snapshot = authority.ledger_snapshot()
    assert canonical_bytes(snapshot)  # round-trippable, no floats, sorted ids
    assert snapshot[0]["bindings"][0]["localState"] == "open"
