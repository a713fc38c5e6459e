"""On-disk workspace backing the command line.

A workspace is one directory holding everything an operator accumulates:
private keys, identity documents, credentials, status lists, name-service
records, policies, and the audit log with its chain-head sidecar.  Every
artifact is stored in its module's own canonical wire form, one file per
artifact, so the files round-trip bit-exactly and diff cleanly.

Commands reconstruct in-memory services (resolver, status store, registry)
from the stored artifacts on each invocation.  Reconstruction re-signs
nothing: signatures ride along inside the stored wire forms, and the
registry rebuild reuses stored field values under the same deterministic
authority key, which reproduces the identical bytes.
"""

from __future__ import annotations

import os
import re
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Optional

from .ans import AnsRecord, AnsRegistry
from .audit import GENESIS_HASH, AuditLog, write_head
from .canonical import canonical_bytes, canonical_loads, to_hex
from .credentials import StatusList, StatusListStore, VerifiableCredential
from .crypto import KeyPair, sha3_256
from .errors import ConflictError, NotFoundError
from .identity import DidDocument, DidResolver, generate_identity
from .policy import PolicyDocument, PolicySet, load_policies

__all__ = ["ENV_ROOT", "Workspace"]

ENV_ROOT = "AGENTIAM_WORKSPACE"

_CONFIG = "config.json"
_SUBDIRS = ("keys", "docs", "credentials", "statuslists", "ans", "policies")


def _safe(name: str) -> str:
    # Identifier-derived filenames: readable stem plus a collision-proof tag.
    stem = re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_") or "x"
    return f"{stem[:80]}-{to_hex(sha3_256(name.encode()))[:10]}.json"


class Workspace:
    """One operator workspace rooted at ``root``."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.config_path = self.root / _CONFIG
        self.audit_path = self.root / "audit.log"
        if not self.config_path.is_file():
            raise NotFoundError(f"no workspace at {self.root} (missing {_CONFIG})")
        self.config: dict[str, Any] = canonical_loads(self.config_path.read_bytes())

    # ── lifecycle ────────────────────────────────────────────────────

    @classmethod
    def initialize(
        cls,
        root: Path,
        *,
        seed: int = 0,
        pull_interval: int = 1,
        trusted_issuers: tuple[str, ...] = (),
    ) -> "Workspace":
        root = Path(root)
        if (root / _CONFIG).exists():
            raise ConflictError(f"workspace already initialized at {root}")
        for sub in _SUBDIRS:
            (root / sub).mkdir(parents=True, exist_ok=True)

        authority_seed = f"workspace:{seed}:registry-authority".encode()
        _, authority_key, authority_doc = generate_identity(authority_seed)
        audit_key = KeyPair.from_seed(
            f"workspace:{seed}:audit-authority".encode(),
            key_id=f"{authority_doc.did.render()}#audit-1",
        )

        config = {
            "seed": seed,
            "pullInterval": pull_interval,
            "trustedIssuers": sorted(trusted_issuers),
            "registryAuthority": authority_doc.did.render(),
            "auditKeyId": audit_key.key_id,
            "initialTrust": 80,
            "reducedTrustThreshold": 60,
        }
        (root / _CONFIG).write_bytes(canonical_bytes(config))
        (root / "sessions.json").write_bytes(canonical_bytes({"sessions": []}))

        workspace = cls(root)
        workspace.save_key(authority_key)
        workspace.save_key(audit_key)
        workspace.save_document(authority_doc)
        workspace.audit_path.write_bytes(b"")
        write_head(workspace.audit_path, GENESIS_HASH, 0)
        return workspace

    @classmethod
    def discover(cls, root: Optional[str]) -> "Workspace":
        chosen = root or os.environ.get(ENV_ROOT) or "."
        return cls(Path(chosen))

    @contextmanager
    def locked(self) -> Iterator[None]:
        """Exclusive advisory lock for mutating commands."""
        lock = self.root / ".lock"
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConflictError(f"workspace is locked by another command ({lock})")
        try:
            os.close(fd)
            yield
        finally:
            lock.unlink(missing_ok=True)

    # ── keys ─────────────────────────────────────────────────────────

    def save_key(self, key: KeyPair) -> Path:
        path = self.root / "keys" / _safe(key.key_id)
        path.write_bytes(
            canonical_bytes(
                {"keyId": key.key_id, "privateKey": to_hex(key.private_bytes())}
            )
        )
        return path

    def load_key(self, key_id: str) -> KeyPair:
        path = self.root / "keys" / _safe(key_id)
        if not path.is_file():
            raise NotFoundError(f"no stored key {key_id!r}")
        value = canonical_loads(path.read_bytes())
        return KeyPair.from_private_bytes(
            bytes.fromhex(value["privateKey"]), key_id=value["keyId"]
        )

    def controller_key(self, document: DidDocument) -> KeyPair:
        return self.load_key(f"{document.controller.render()}#key-1")

    # ── identity documents ───────────────────────────────────────────

    def save_document(self, document: DidDocument) -> Path:
        path = self.root / "docs" / _safe(document.did.render())
        path.write_bytes(document.canonical())
        return path

    def load_document(self, did: str) -> DidDocument:
        path = self.root / "docs" / _safe(did)
        if not path.is_file():
            raise NotFoundError(f"no stored document for {did}")
        return DidDocument.from_value(canonical_loads(path.read_bytes()))

    def documents(self) -> list[DidDocument]:
        return [
            DidDocument.from_value(canonical_loads(path.read_bytes()))
            for path in sorted((self.root / "docs").glob("*.json"))
        ]

    def resolver(self) -> DidResolver:
        resolver = DidResolver()
        for document in self.documents():
            resolver.register(document)
        return resolver

    # ── credentials and status lists ─────────────────────────────────

    def save_credential(self, credential: VerifiableCredential) -> Path:
        path = self.root / "credentials" / _safe(credential.credential_id)
        path.write_bytes(credential.canonical())
        return path

    def load_credential(self, credential_id: str) -> VerifiableCredential:
        path = self.root / "credentials" / _safe(credential_id)
        if not path.is_file():
            raise NotFoundError(f"no stored credential {credential_id!r}")
        return VerifiableCredential.from_value(canonical_loads(path.read_bytes()))

    def credentials(self) -> list[VerifiableCredential]:
        return [
            VerifiableCredential.from_value(canonical_loads(path.read_bytes()))
            for path in sorted((self.root / "credentials").glob("*.json"))
        ]

    def save_status_list(self, status_list: StatusList) -> Path:
        path = self.root / "statuslists" / _safe(status_list.list_id)
        path.write_bytes(canonical_bytes(status_list.to_value()))
        return path

    def status_store(self) -> StatusListStore:
        store = StatusListStore()
        for path in sorted((self.root / "statuslists").glob("*.json")):
            store.put(StatusList.from_value(canonical_loads(path.read_bytes())))
        return store

    # ── name service ─────────────────────────────────────────────────

    def _ans_path(self) -> Path:
        return self.root / "ans" / "records.json"

    def registry(
        self,
        resolver: Optional[DidResolver] = None,
        status_store: Optional[StatusListStore] = None,
    ) -> AnsRegistry:
        resolver = resolver or self.resolver()
        authority_doc = resolver.resolve(self.config["registryAuthority"])
        authority_key = self.load_key(f"{self.config['registryAuthority']}#key-1")
        stored = {c.credential_id: c for c in self.credentials()}
        registry = AnsRegistry(
            authority_doc,
            authority_key,
            resolver,
            credential_lookup=stored.get,
            status_store=status_store or self.status_store(),
        )
        if self._ans_path().is_file():
            for value in canonical_loads(self._ans_path().read_bytes()):
                record = AnsRecord.from_value(value)
                registry.register(
                    record.ans_name,
                    record.agent_did,
                    record.service_endpoint,
                    record.capabilities,
                    protocol_extensions=record.protocol_extensions,
                    attestation_refs=record.attestation_refs,
                    live=record.live,
                )
                if record.revoked:
                    registry.deregister(record.ans_name)
        return registry

    def save_registry(self, registry: AnsRegistry) -> Path:
        values = sorted(
            (record.to_value() for record in registry.records()),
            key=lambda value: value["ansName"],
        )
        self._ans_path().write_bytes(canonical_bytes(values))
        return self._ans_path()

    # ── policies ─────────────────────────────────────────────────────

    def save_policy(self, policy: PolicyDocument) -> Path:
        path = self.root / "policies" / _safe(policy.policy_id)
        path.write_bytes(canonical_bytes(policy.to_value()))
        return path

    def policy_set(self) -> PolicySet:
        values = [
            canonical_loads(path.read_bytes())
            for path in sorted((self.root / "policies").glob("*.json"))
        ]
        return load_policies(values)

    # ── audit log ────────────────────────────────────────────────────

    def audit_log(self) -> AuditLog:
        key = self.load_key(self.config["auditKeyId"])
        return AuditLog(key, path=self.audit_path)

    def audit_public_key(self) -> bytes:
        return self.load_key(self.config["auditKeyId"]).public_key
