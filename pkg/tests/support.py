"""Shared generators and independent oracles used by several test modules.

Everything here stays off the package's serializer and chain walk: documents
are re-encoded with json.dumps, digests come from hashlib, and compliance
counts come from a plain-python rescan, so expectations are computed on a
second path.
"""

import hashlib
import json
import random
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

from agentiam.audit import AuditLog, compliance_report
from agentiam.crypto import KeyPair
from agentiam.policy import PathRef, Predicate

GENESIS = b"\x00" * 32

CHAIN_LENGTH = 32


def jdump(value) -> bytes:
    """Second serializer: for the ASCII value domain used in these tests it
    must agree byte for byte with the package's canonical form.
    """
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def sha3(data: bytes) -> bytes:
    return hashlib.sha3_256(data).digest()


def ed_verify(public_key: bytes, payload: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, payload)
        return True
    except (InvalidSignature, ValueError):
        return False


def oracle_scan(lines, public_key, expected_head):
    """Reference chain walk over raw file lines, counting entry positions."""
    prev = GENESIS
    count = 0
    for line in lines:
        if not line:
            continue
        try:
            value = json.loads(line.decode("utf-8"))
        except Exception:
            return False, count
        if not isinstance(value, dict) or jdump(value) != line:
            return False, count
        try:
            prev_field = bytes.fromhex(value["prevEntryHash"])
            signature = bytes.fromhex(value["logEntrySignature"])
        except (KeyError, ValueError):
            return False, count
        if prev_field != prev:
            return False, count
        body = {k: v for k, v in value.items() if k != "logEntrySignature"}
        if not ed_verify(public_key, jdump(body), signature):
            return False, count
        prev = sha3(line)
        count += 1
    if expected_head is not None and prev != expected_head:
        return False, count
    return True, None


def build_chain_log(path: Path, length: int = CHAIN_LENGTH) -> tuple[AuditLog, KeyPair]:
    authority = KeyPair.from_seed(b"fault-sweep-authority", key_id="audit-authority#log-1")
    log = AuditLog(authority, path=path)
    for i in range(length):
        log.append(
            agent_did=f"did:com:acme:agent:worker-{i % 5}",
            action=["AnsResolve", "IssueCredential", "McpInvoke", "DeliverMessage"][i % 4],
            now=i // 2,
            input_parameters={"step": i},
            presented_vc_ids=[f"vc:jwt:uri:acme:step-{i}"],
            collaboration_context={"taskId": f"task-{i % 3}"},
            outcome={"status": "Success", "jobId": f"job-{i % 4}"},
        )
    return log, authority


class FaultInjector:
    """Single faults over a pristine log file image, with the analytically
    expected first-corruption position for each.
    """

    KINDS = ("flip", "byte-insert", "byte-delete", "line-delete", "line-insert")

    def __init__(self, data: bytes, forged_line: bytes):
        self.data = data
        self.lines = data.split(b"\n")[:-1]
        self.forged_line = forged_line

    def inject(self, rng: random.Random) -> tuple[bytes, int, str]:
        kind = rng.choice(self.KINDS)
        data = self.data
        if kind == "flip":
            p = rng.randrange(len(data))
            flipped = data[p] ^ rng.randrange(1, 256)
            return data[:p] + bytes([flipped]) + data[p + 1 :], data[:p].count(b"\n"), kind
        if kind == "byte-insert":
            p = rng.randrange(len(data) + 1)
            value = rng.choice([i for i in range(256) if i != 0x0A])
            return data[:p] + bytes([value]) + data[p:], data[:p].count(b"\n"), kind
        if kind == "byte-delete":
            # Dropping the final newline leaves the content unchanged, so
            # stop one byte short of it.
            p = rng.randrange(len(data) - 1)
            return data[:p] + data[p + 1 :], data[:p].count(b"\n"), kind
        if kind == "line-delete":
            i = rng.randrange(len(self.lines))
            kept = self.lines[:i] + self.lines[i + 1 :]
            return b"".join(line + b"\n" for line in kept), i, kind
        i = rng.randrange(len(self.lines) + 1)
        if rng.random() < 0.5:
            j = rng.randrange(len(self.lines))
            inserted, expected = self.lines[j], (i + 1 if j == i else i)
        else:
            inserted, expected = self.forged_line, i
        patched = self.lines[:i] + [inserted] + self.lines[i:]
        return b"".join(line + b"\n" for line in patched), expected, kind


def forged_entry_line(log: AuditLog) -> bytes:
    """A plausible entry signed by a key that is not the log authority."""
    intruder = KeyPair.from_seed(b"intruder-key", key_id="intruder#key-1")
    shadow = AuditLog(intruder)
    template = log.entries()[-1]
    entry = shadow.append(
        agent_did=template.agent_did,
        action=template.action_performed,
        now=template.tick,
        outcome=dict(template.outcome),
    )
    return jdump(entry.to_value())


def run_chain_fault_sweep(tmp_dir: Path, trials: int, seed: int) -> int:
    """Inject ``trials`` random faults into copies of one pristine chain; the
    package walk and the reference walk must both flag the analytically
    expected position every time. Returns the number of faults checked.
    """
    from agentiam.audit import read_head, verify_log_file

    pristine_path = Path(tmp_dir) / "pristine.log"
    log, authority = build_chain_log(pristine_path)
    data = pristine_path.read_bytes()
    head_bytes = Path(str(pristine_path) + ".head").read_bytes()
    expected_head = bytes.fromhex(json.loads(head_bytes)["headHash"])
    injector = FaultInjector(data, forged_entry_line(log))

    rng = random.Random(seed)
    trial_path = Path(tmp_dir) / "faulted.log"
    Path(str(trial_path) + ".head").write_bytes(head_bytes)
    checked = 0
    for _ in range(trials):
        faulted, expected_index, kind = injector.inject(rng)
        trial_path.write_bytes(faulted)
        ok, index = verify_log_file(trial_path, authority.public_key)
        oracle_ok, oracle_index = oracle_scan(
            faulted.split(b"\n"), authority.public_key, expected_head
        )
        assert not ok and not oracle_ok, f"{kind} fault went undetected"
        assert index == oracle_index == expected_index, (
            f"{kind} fault: package={index} oracle={oracle_index} expected={expected_index}"
        )
        checked += 1
    assert read_head(pristine_path) is not None
    return checked


# Compliance-report fixtures: allow decisions on PII-tagged resources must
# carry the level-3 credential from an approved issuer and a permitted source.

APPROVED_ISSUERS = ("did:com:acme:audit:pii-issuer", "did:com:acme:audit:sox-issuer")

PII_DESCRIPTION = (
    "every allow on resources tagged PII_Strict carried PII_AccessLevel3_Certified "
    "from an approved issuer and source in {segA, segB}"
)

PII_SCOPE = (
    Predicate("entry.outcome.status", "equals", "allow"),
    Predicate("entry.outcome.resourceTags[]", "memberOf", ("PII_Strict",)),
)

PII_REQUIREMENT = (
    Predicate("entry.outcome.credentialTypes[]", "memberOf", ("PII_AccessLevel3_Certified",)),
    Predicate("entry.outcome.issuer", "memberOf", PathRef("approvedIssuers")),
    Predicate("entry.outcome.source", "memberOf", ("segA", "segB")),
)


def compliant_outcome(rng: random.Random) -> dict:
    return {
        "status": "allow",
        "resourceTags": ["PII_Strict"],
        "credentialTypes": ["PII_AccessLevel3_Certified", "RoleCredential"],
        "issuer": rng.choice(APPROVED_ISSUERS),
        "source": rng.choice(["segA", "segB"]),
    }


def random_outcome(rng: random.Random) -> dict:
    return {
        "status": rng.choice(["allow", "deny"]),
        "resourceTags": rng.choice(
            [["PII_Strict"], ["Public"], ["PII_Strict", "Finance"], []]
        ),
        "credentialTypes": rng.choice(
            [["PII_AccessLevel3_Certified"], ["RoleCredential"], [], ["PII_AccessLevel3_Certified", "RoleCredential"]]
        ),
        "issuer": rng.choice(list(APPROVED_ISSUERS) + ["did:com:outsider:issuer"]),
        "source": rng.choice(["segA", "segB", "segC"]),
    }


def build_compliance_log(rng: random.Random, size: int, agent_realm: str = "acme", outcomes=None):
    authority = KeyPair.from_seed(b"compliance-authority", key_id="audit-authority#log-1")
    log = AuditLog(authority)
    for i in range(size):
        outcome = outcomes[i] if outcomes is not None else random_outcome(rng)
        log.append(
            agent_did=f"did:com:{agent_realm}:agent:worker-{i % 7}",
            action="DataAccess",
            now=i,
            input_parameters={"row": i},
            outcome=outcome,
        )
    return log, authority


def oracle_compliance_counts(entries) -> tuple[int, int, list[str]]:
    """Plain-python rescan of the PII rule; returns matched, violations, and
    the violating eventIds in chain order.
    """
    matched = 0
    violating: list[str] = []
    for entry in entries:
        outcome = entry.outcome
        if outcome.get("status") != "allow":
            continue
        if "PII_Strict" not in outcome.get("resourceTags", []):
            continue
        fine = (
            "PII_AccessLevel3_Certified" in outcome.get("credentialTypes", [])
            and outcome.get("issuer") in APPROVED_ISSUERS
            and outcome.get("source") in ("segA", "segB")
        )
        if fine:
            matched += 1
        else:
            violating.append(entry.event_id)
    return matched, len(violating), violating


def pii_report(log: AuditLog, authority: KeyPair, nonce: str):
    return compliance_report(
        log.entries(),
        description=PII_DESCRIPTION,
        scope=PII_SCOPE,
        requirement=PII_REQUIREMENT,
        approved_issuers=APPROVED_ISSUERS,
        auditor_nonce=nonce,
        authority=authority,
    )
