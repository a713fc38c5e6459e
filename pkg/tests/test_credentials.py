"""Credentials: issuance, verification reasons, status lists, disclosure."""

from __future__ import annotations

import copy
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentiam.credentials import (
    BASE_TYPE,
    Presentation,
    Reason,
    StatusListStore,
    StatusRef,
    VerifiableCredential,
    issue,
    issue_reputation,
    issue_tool_pass,
    new_status_list,
    present,
    revoke_index,
    verify_credential,
    verify_presentation,
)
from agentiam.errors import (
    InvalidInputError,
    IssuerInactiveError,
    MonotonicityViolationError,
    NotFoundError,
    ReplayDetectedError,
    ResolutionFailureError,
    UnauthorizedError,
    UnknownClaimError,
)
from agentiam.identity import DidResolver, deactivate, generate_identity


def _rng_salts(seed):
    rng = random.Random(seed)
    return lambda: rng.randbytes(32)


@pytest.fixture
def world():
    """Issuer, holder, resolver, and status store used across tests."""
    resolver = DidResolver()
    issuer_did, issuer_key, issuer_doc = generate_identity(b"issuer-seed")
    holder_did, holder_key, holder_doc = generate_identity(b"holder-seed")
    resolver.register(issuer_doc)
    resolver.register(holder_doc)
    return {
        "resolver": resolver,
        "issuer": (issuer_did, issuer_key, issuer_doc),
        "holder": (holder_did, holder_key, holder_doc),
        "status": StatusListStore(),
    }


def _basic_credential(world, valid_from=10, valid_until=100, status_ref=None, salts=7):
    _, issuer_key, issuer_doc = world["issuer"]
    holder_did, _, _ = world["holder"]
    return issue(
        issuer_doc,
        issuer_key,
        holder_did,
        types=("RoleCredential",),
        claims={"role": "FinancialRiskAnalystRole", "clearance": 2},
        valid_from=valid_from,
        valid_until=valid_until,
        status_ref=status_ref,
        salt_source=_rng_salts(salts),
    )


# ── issuance ────────────────────────────────────────────────────────────

def test_issue_and_verify_round_trip(world):
    credential = _basic_credential(world)
    result = verify_credential(credential, world["resolver"], world["status"], now=50)
    assert result.valid and result.reasons == ()
    assert BASE_TYPE in credential.types
    assert credential.claims["role"] == "FinancialRiskAnalystRole"


def test_issue_rejects_ill_ordered_window(world):
    _, issuer_key, issuer_doc = world["issuer"]
    holder_did, _, _ = world["holder"]
    with pytest.raises(InvalidInputError):
        issue(issuer_doc, issuer_key, holder_did, ("T",), {"x": 1}, valid_from=10, valid_until=9)


def test_issue_refused_for_revoked_issuer(world):
    _, issuer_key, issuer_doc = world["issuer"]
    holder_did, _, _ = world["holder"]
    revoked = deactivate(issuer_doc, issuer_key, now=1)
    with pytest.raises(IssuerInactiveError):
        issue(revoked, issuer_key, holder_did, ("T",), {"x": 1}, valid_from=0)


def test_credential_serialization_round_trip(world):
    credential = _basic_credential(world)
    again = VerifiableCredential.from_value(credential.to_value())
    assert again.canonical() == credential.canonical()
    result = verify_credential(again, world["resolver"], world["status"], now=50)
    assert result.valid


def test_unresolvable_issuer_raises(world):
    credential = _basic_credential(world)
    with pytest.raises(ResolutionFailureError):
        verify_credential(credential, DidResolver(), world["status"], now=50)


@given(st.integers(min_value=0, max_value=200), st.integers(min_value=0, max_value=200))
@settings(max_examples=60)
def test_window_semantics_inclusive(valid_from, width):
    resolver = DidResolver()
    _, issuer_key, issuer_doc = generate_identity(b"window-issuer")
    holder_did, _, _ = generate_identity(b"window-holder")
    resolver.register(issuer_doc)
    valid_until = valid_from + width
    credential = issue(
        issuer_doc, issuer_key, holder_did, ("T",), {"x": 1},
        valid_from=valid_from, valid_until=valid_until, salt_source=_rng_salts(1),
    )
    for now, expect in [
        (valid_from - 1, [Reason.NOT_YET_VALID]),
        (valid_from, []),
        (valid_until, []),
        (valid_until + 1, [Reason.EXPIRED]),
    ]:
        result = verify_credential(credential, resolver, None, now=now)
        assert list(result.reasons) == expect


# ── failure enumeration ─────────────────────────────────────────────────

def _flip_signature(credential):
    from dataclasses import replace

    bad = bytearray(credential.proof.signature)
    bad[0] ^= 0x01
    return replace(credential, proof=replace(credential.proof, signature=bytes(bad)))


def test_perturbation_axes_yield_exact_reasons(world):
    """Five perturbation axes, twenty credentials each, exact reasons."""
    resolver = world["resolver"]
    store = world["status"]
    _, issuer_key, issuer_doc = world["issuer"]
    holder_did, _, _ = world["holder"]
    rogue_did, rogue_key, rogue_doc = generate_identity(b"rogue-issuer")
    resolver.register(rogue_doc)

    status_list = new_status_list("sl:perturb", issuer_doc, issuer_key, size=64)
    store.put(status_list)

    for i in range(20):
        ref = StatusRef("sl:perturb", i)
        credential = issue(
            issuer_doc, issuer_key, holder_did, ("T",),
            {"n": i}, valid_from=10, valid_until=100,
            status_ref=ref, salt_source=_rng_salts(100 + i),
        )
        assert verify_credential(credential, resolver, store, now=50).valid

        expired = verify_credential(credential, resolver, store, now=101)
        assert list(expired.reasons) == [Reason.EXPIRED]

        early = verify_credential(credential, resolver, store, now=9)
        assert list(early.reasons) == [Reason.NOT_YET_VALID]

        tampered = verify_credential(_flip_signature(credential), resolver, store, now=50)
        assert list(tampered.reasons) == [Reason.BAD_SIGNATURE]

        untrusted = verify_credential(
            credential, resolver, store, now=50, trusted_issuers=[rogue_did.render()]
        )
        assert list(untrusted.reasons) == [Reason.UNTRUSTED_ISSUER]

        store.put(revoke_index(store.get("sl:perturb"), i, issuer_key))
        revoked = verify_credential(credential, resolver, store, now=50)
        assert list(revoked.reasons) == [Reason.REVOKED]


def test_issuer_revocation_reason(world):
    resolver = world["resolver"]
    _, issuer_key, issuer_doc = world["issuer"]
    credential = _basic_credential(world)
    resolver.register(deactivate(issuer_doc, issuer_key, now=1))
    result = verify_credential(credential, resolver, world["status"], now=50)
    assert Reason.ISSUER_REVOKED in result.reasons
    assert not result.valid


def test_multiple_failures_all_enumerated(world):
    resolver = world["resolver"]
    _, issuer_key, issuer_doc = world["issuer"]
    credential = _flip_signature(_basic_credential(world))
    resolver.register(deactivate(issuer_doc, issuer_key, now=1))
    result = verify_credential(
        credential, resolver, world["status"], now=101, trusted_issuers=[]
    )
    assert set(result.reasons) == {
        Reason.BAD_SIGNATURE,
        Reason.EXPIRED,
        Reason.ISSUER_REVOKED,
        Reason.UNTRUSTED_ISSUER,
    }


# ── status lists ────────────────────────────────────────────────────────

def test_revocation_version_and_monotonicity(world):
    _, issuer_key, issuer_doc = world["issuer"]
    status_list = new_status_list("sl:mono", issuer_doc, issuer_key, size=16)
    assert status_list.version == 0
    revoked = revoke_index(status_list, 5, issuer_key)
    assert revoked.version == 1 and revoked.is_set(5)
    with pytest.raises(MonotonicityViolationError):
        revoke_index(revoked, 5, issuer_key)
    assert revoked.version == 1  # rejected call did not advance anything


def test_revocation_requires_owner(world):
    _, issuer_key, issuer_doc = world["issuer"]
    _, holder_key, _ = world["holder"]
    status_list = new_status_list("sl:own", issuer_doc, issuer_key, size=8)
    with pytest.raises(UnauthorizedError):
        revoke_index(status_list, 0, holder_key)


def test_revocation_neighbors_untouched_exhaustive(world):
    """Setting each bit of a 64-slot list flips exactly that bit."""
    _, issuer_key, issuer_doc = world["issuer"]
    for index in range(64):
        status_list = new_status_list("sl:x", issuer_doc, issuer_key, size=64)
        revoked = revoke_index(status_list, index, issuer_key)
        assert [revoked.is_set(i) for i in range(64)] == [i == index for i in range(64)]


def test_revocation_extends_by_one(world):
    _, issuer_key, issuer_doc = world["issuer"]
    status_list = new_status_list("sl:grow", issuer_doc, issuer_key, size=8)
    grown = revoke_index(status_list, 8, issuer_key)
    assert grown.size == 9 and grown.is_set(8)
    with pytest.raises(InvalidInputError):
        revoke_index(status_list, 10, issuer_key)


def test_store_rejects_stale_versions(world):
    _, issuer_key, issuer_doc = world["issuer"]
    store = StatusListStore()
    status_list = new_status_list("sl:v", issuer_doc, issuer_key, size=8)
    store.put(status_list)
    newer = revoke_index(status_list, 1, issuer_key)
    store.put(newer)
    with pytest.raises(MonotonicityViolationError):
        store.put(status_list)
    with pytest.raises(NotFoundError):
        store.get("sl:absent")


# ── presentations ───────────────────────────────────────────────────────

def test_selective_disclosure_reveals_exactly_chosen_claims(world):
    credential = _basic_credential(world)
    _, holder_key, _ = world["holder"]
    nonce = b"verifier-nonce-1"
    presentation = present(holder_key, [credential], {credential.credential_id: ["role"]}, nonce)
    result, disclosed = verify_presentation(
        presentation, world["resolver"], world["status"], now=50, nonce=nonce
    )
    assert result.valid
    (view,) = disclosed
    assert view.claims == {"role": "FinancialRiskAnalystRole"}
    assert "clearance" not in view.claims
    assert view.types == credential.types
    blob = presentation.canonical().decode()
    assert "clearance" not in blob or '"clearance"' not in blob.split('"openings"')[1]


def test_undisclosed_values_absent_from_bytes(world):
    credential = _basic_credential(world)
    _, holder_key, _ = world["holder"]
    presentation = present(holder_key, [credential], {credential.credential_id: ["role"]}, b"n")
    assert b'"clearance":2' not in presentation.canonical()


def test_full_disclosure_matches_plain_verification(world):
    credential = _basic_credential(world)
    _, holder_key, _ = world["holder"]
    nonce = b"nonce-full"
    presentation = present(
        holder_key, [credential], {credential.credential_id: ["role", "clearance"]}, nonce
    )
    result, disclosed = verify_presentation(
        presentation, world["resolver"], world["status"], now=50, nonce=nonce
    )
    plain = verify_credential(credential, world["resolver"], world["status"], now=50)
    assert result.valid == plain.valid
    assert disclosed[0].claims == dict(credential.claims)


def test_unknown_claim_rejected(world):
    credential = _basic_credential(world)
    _, holder_key, _ = world["holder"]
    with pytest.raises(UnknownClaimError):
        present(holder_key, [credential], {credential.credential_id: ["salary"]}, b"n")


def test_nonce_replay_detected(world):
    credential = _basic_credential(world)
    _, holder_key, _ = world["holder"]
    presentation = present(holder_key, [credential], {}, b"nonce-a")
    with pytest.raises(ReplayDetectedError):
        verify_presentation(
            presentation, world["resolver"], world["status"], now=50, nonce=b"nonce-b"
        )


def test_presentation_requires_subject(world):
    credential = _basic_credential(world)
    _, issuer_key, _ = world["issuer"]
    with pytest.raises(UnauthorizedError):
        present(issuer_key, [credential], {}, b"n")


def test_wrong_salt_never_opens(world):
    """A thousand random wrong salts all fail to open a commitment."""
    credential = _basic_credential(world)
    _, holder_key, _ = world["holder"]
    nonce = b"fuzz"
    rng = random.Random(11)
    base = present(holder_key, [credential], {credential.credential_id: ["role"]}, nonce)
    true_salt = credential.claim_salts["role"]
    for _ in range(1000):
        salt = rng.randbytes(32)
        if salt == true_salt:
            continue
        forged = Presentation.from_value(base.to_value())
        doctored = forged.to_value()
        doctored["credentials"][0]["openings"]["role"]["salt"] = salt.hex()
        forged = Presentation.from_value(doctored)
        result, _ = verify_presentation(
            forged, world["resolver"], world["status"], now=50, nonce=nonce
        )
        assert not result.valid
        assert Reason.BAD_SIGNATURE in result.reasons


def test_tampered_presentation_body_fails(world):
    credential = _basic_credential(world)
    _, holder_key, _ = world["holder"]
    nonce = b"tamper"
    presentation = present(holder_key, [credential], {credential.credential_id: ["role"]}, nonce)
    doctored = presentation.to_value()
    doctored["credentials"][0]["openings"]["role"]["value"] = "ChiefFinancialOfficer"
    forged = Presentation.from_value(doctored)
    result, disclosed = verify_presentation(
        forged, world["resolver"], world["status"], now=50, nonce=nonce
    )
    assert not result.valid
    assert "role" not in disclosed[0].claims


def test_hiding_presentations_differ_only_in_blinded_fields(world):
    """Two credentials unequal only in an undisclosed claim produce
    presentations whose non-opening differences are salt-blinded bytes."""
    _, issuer_key, issuer_doc = world["issuer"]
    holder_did, holder_key, _ = world["holder"]

    def make(secret, salts):
        return issue(
            issuer_doc, issuer_key, holder_did, ("T",),
            {"role": "Analyst", "secret": secret},
            valid_from=0, valid_until=10,
            credential_id="vc:agentlab:hiding-probe",
            salt_source=_rng_salts(salts),
        )

    nonce = b"hiding"
    pres_a = present(holder_key, [make("alpha", 1)], {"vc:agentlab:hiding-probe": ["role"]}, nonce)
    pres_b = present(holder_key, [make("omega", 2)], {"vc:agentlab:hiding-probe": ["role"]}, nonce)

    val_a, val_b = copy.deepcopy(pres_a.to_value()), copy.deepcopy(pres_b.to_value())
    sub_a = val_a["credentials"][0]["credential"]["credentialSubject"]
    sub_b = val_b["credentials"][0]["credential"]["credentialSubject"]
    # Commitments are salt-blinded, so they differ whether or not the
    # underlying value does; everything that is not salt-derived agrees.
    assert sub_a.pop("secret") != sub_b.pop("secret")
    assert sub_a.pop("role") != sub_b.pop("role")
    assert sub_a == sub_b
    open_a = val_a["credentials"][0]["openings"]["role"]
    open_b = val_b["credentials"][0]["openings"]["role"]
    assert open_a["value"] == open_b["value"] == "Analyst"
    for val in (val_a, val_b):
        val["credentials"][0]["openings"]["role"].pop("salt")
        val["credentials"][0]["proof"].pop("signatureValue")
        val.pop("holderProof")
    assert val_a == val_b
    for blob, secret in [(pres_a.canonical(), b"alpha"), (pres_b.canonical(), b"omega")]:
        assert secret not in blob
    # Same value, fresh salts: the commitment is unlinkable across issuances.
    re_a = present(holder_key, [make("alpha", 3)], {"vc:agentlab:hiding-probe": ["role"]}, nonce)
    assert (
        re_a.to_value()["credentials"][0]["credential"]["credentialSubject"]["secret"]
        != pres_a.to_value()["credentials"][0]["credential"]["credentialSubject"]["secret"]
    )


# ── common shapes ───────────────────────────────────────────────────────

def test_tool_pass_window_and_claims(world):
    _, issuer_key, issuer_doc = world["issuer"]
    holder_did, _, _ = world["holder"]
    pass_vc = issue_tool_pass(
        issuer_doc, issuer_key, holder_did,
        tool_did="did:com:acmetools:mcp:tool:transformQ:instance03",
        allowed_actions=["executeTransform"],
        job_id="job-ephemeral-77a",
        input_handle="blob://temp-input-xyz",
        output_handle="blob://temp-output-xyz",
        valid_from=870,
        salt_source=_rng_salts(5),
    )
    assert pass_vc.valid_until == 884  # fifteen ticks inclusive
    assert "MCPToolAccessPass" in pass_vc.types
    assert pass_vc.claims["authorizedToolDID"].endswith("instance03")
    assert sum(1 for t in range(860, 900)
               if verify_credential(pass_vc, world["resolver"], None, now=t).valid) == 15


def test_reputation_credential_shape(world):
    _, issuer_key, issuer_doc = world["issuer"]
    holder_did, _, _ = world["holder"]
    rep = issue_reputation(
        issuer_doc, issuer_key, holder_did,
        rating=5, task_id="task_delivery_0042",
        capability_context="TaskExecutor.GeneralPurpose.CommunityPool.v1.standard",
        comment="Prompt delivery, spec matched.",
        valid_from=0,
        salt_source=_rng_salts(6),
    )
    assert set(rep.types) == {BASE_TYPE, "ReputationCredential", "PerformanceReview"}
    assert rep.claims["rating"] == 5
    with pytest.raises(InvalidInputError):
        issue_reputation(
            issuer_doc, issuer_key, holder_did, rating=6, task_id="t",
            capability_context="c", comment="", valid_from=0,
        )


@given(st.dictionaries(
    st.text(min_size=1, max_size=8).filter(lambda s: s != "id"),
    st.one_of(st.integers(), st.text(max_size=12), st.lists(st.integers(), max_size=3)),
    min_size=1, max_size=5,
))
@settings(max_examples=50)
def test_issue_verify_property(claims):
    resolver = DidResolver()
    _, issuer_key, issuer_doc = generate_identity(b"prop-issuer")
    holder_did, holder_key, holder_doc = generate_identity(b"prop-holder")
    resolver.register(issuer_doc)
    resolver.register(holder_doc)
    credential = issue(
        issuer_doc, issuer_key, holder_did, ("T",), claims,
        valid_from=0, valid_until=10, salt_source=_rng_salts(9),
    )
    assert verify_credential(credential, resolver, None, now=5).valid
    assert credential.claims == claims
    nonce = b"prop"
    presentation = present(
        holder_key, [credential], {credential.credential_id: list(claims)}, nonce
    )
    result, disclosed = verify_presentation(presentation, resolver, None, now=5, nonce=nonce)
    assert result.valid
    assert disclosed[0].claims == claims
