"""Operator command line.

Thin composition over the library: every subcommand loads artifacts from
the workspace, calls the same module operations any embedding program
would, and writes results back in the modules' own wire forms.  No
authorization or verification logic lives here.

Exit codes separate failure classes: 2 for usage problems, 3 for failed
verification, 4 for a policy denial from ``policy eval``, 5 for integrity
violations in stored logs or lists.
"""

from __future__ import annotations

import functools
import json
import random
from pathlib import Path
from typing import Any, Mapping, Optional

import click

from .ans import AnsQuery, QueryMode
from .audit import load_log, read_head, verify_log_file
from .audit import compliance_report as build_compliance_report
from .audit import extract_provenance as build_provenance
from .canonical import canonical_bytes, canonical_loads, to_hex
from .credentials import (
    DisclosedCredential,
    StatusRef,
    VerifiableCredential,
    issue,
    new_status_list,
    present,
    revoke_index,
    verify_credential,
)
from .crypto import ALGORITHM, KeyPair, sha3_256
from .errors import (
    ClockViolationError,
    IamError,
    IdentityRevokedError,
    InvalidEntryError,
    MonotonicityViolationError,
    NotFoundError,
    ReplayDetectedError,
    ResolutionFailureError,
    VerificationRefusedError,
)
from .harness import builtin_scenario, execute, load_scenario_file
from .harness.builtins import BUILTIN_SCENARIOS
from .identity import (
    AgentDid,
    CapabilityProfile,
    ServiceEndpoint,
    ToolGrant,
    VerificationMethod,
    deactivate,
    generate_identity,
    update_document,
)
from .policy import (
    DEFAULT_RISK_RULES,
    PolicyDocument,
    evaluate,
    evaluate_with_risk,
    gather_attributes,
    load_policies,
)
from .workspace import Workspace

EXIT_USAGE = 2
EXIT_VERIFY = 3
EXIT_DENY = 4
EXIT_INTEGRITY = 5

_INTEGRITY_ERRORS = (InvalidEntryError, ClockViolationError, MonotonicityViolationError)
_VERIFY_ERRORS = (
    VerificationRefusedError,
    ReplayDetectedError,
    IdentityRevokedError,
    ResolutionFailureError,
)


class Failure(click.ClickException):
    def __init__(self, message: str, exit_code: int) -> None:
        super().__init__(message)
        self.exit_code = exit_code


def _mapped(command):
    """Translate library errors into the command's exit-code classes."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except _INTEGRITY_ERRORS as exc:
            raise Failure(str(exc), EXIT_INTEGRITY)
        except _VERIFY_ERRORS as exc:
            raise Failure(str(exc), EXIT_VERIFY)
        except IamError as exc:
            raise Failure(str(exc), EXIT_USAGE)

    return wrapper


def _workspace(ctx: click.Context) -> Workspace:
    try:
        return Workspace.discover(ctx.obj["root"])
    except NotFoundError as exc:
        raise Failure(str(exc), EXIT_USAGE)


def _emit(ctx: click.Context, value: Any, text: Optional[str] = None) -> None:
    if ctx.obj["format"] == "canonical":
        click.echo(canonical_bytes(value).decode())
    elif text is not None:
        click.echo(text)
    else:
        click.echo(json.dumps(value, indent=2, sort_keys=True))


def _parse_scalar(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _parse_pairs(pairs: tuple[str, ...], option: str) -> dict[str, Any]:
    parsed: dict[str, Any] = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise Failure(f"{option} expects key=value, got {pair!r}", EXIT_USAGE)
        parsed[key] = _parse_scalar(raw)
    return parsed


def _document_arg(raw: str) -> Any:
    """JSON literal, or @path to a canonical document file."""
    if raw.startswith("@"):
        path = Path(raw[1:])
        if not path.is_file():
            raise Failure(f"no such file {path}", EXIT_USAGE)
        return canonical_loads(path.read_bytes())
    return _parse_scalar(raw)


@click.group()
@click.option(
    "--root",
    type=click.Path(),
    default=None,
    envvar="AGENTIAM_WORKSPACE",
    help="Workspace directory (default: $AGENTIAM_WORKSPACE or '.').",
)
@click.option(
    "--format",
    "output_format",
    type=click.Choice(["text", "canonical"]),
    default="text",
    help="Human-readable text or bit-exact canonical documents.",
)
@click.pass_context
def main(ctx: click.Context, root: Optional[str], output_format: str) -> None:
    """Identity, credential, registry, policy, scenario, and audit tooling."""
    ctx.obj = {"root": root, "format": output_format}


# ── init ─────────────────────────────────────────────────────────────


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pull-interval", type=int, default=1, show_default=True)
@click.option("--trusted-issuer", "trusted", multiple=True)
@click.pass_context
@_mapped
def init(ctx: click.Context, seed: int, pull_interval: int, trusted: tuple[str, ...]) -> None:
    """Create a new workspace in the root directory."""
    root = Path(ctx.obj["root"] or ".")
    workspace = Workspace.initialize(
        root, seed=seed, pull_interval=pull_interval, trusted_issuers=tuple(trusted)
    )
    _emit(
        ctx,
        {"root": str(workspace.root), "registryAuthority": workspace.config["registryAuthority"]},
        text=f"initialized {workspace.root}\nregistry authority: {workspace.config['registryAuthority']}",
    )


# ── id ───────────────────────────────────────────────────────────────


@main.group(name="id")
def id_group() -> None:
    """Agent identities and their documents."""


def _parse_tool(raw: str) -> ToolGrant:
    parts = raw.split(":", 2)
    name = parts[0]
    targets = tuple(t for t in parts[1].split(",") if t) if len(parts) > 1 else ()
    tool_did = parts[2] if len(parts) > 2 and parts[2] else None
    if not name:
        raise Failure(f"--tool expects name[:targets[:toolDid]], got {raw!r}", EXIT_USAGE)
    return ToolGrant(name, targets, tool_did=tool_did)


@id_group.command(name="new")
@click.option("--seed", required=True, help="Deterministic key seed (any text).")
@click.option("--scope", multiple=True, help="Declared capability, repeatable.")
@click.option("--tool", "tools", multiple=True, help="name[:targets[:toolDid]], repeatable.")
@click.option("--endpoint", "endpoints", multiple=True, help="name=url, repeatable.")
@click.option("--now", type=int, default=0, show_default=True)
@click.pass_context
@_mapped
def id_new(
    ctx: click.Context,
    seed: str,
    scope: tuple[str, ...],
    tools: tuple[str, ...],
    endpoints: tuple[str, ...],
    now: int,
) -> None:
    """Generate a self-certifying identity and store its key and document."""
    workspace = _workspace(ctx)
    profile = None
    if scope or tools or endpoints:
        profile = CapabilityProfile(
            scope_of_behavior=tuple(scope),
            toolset=tuple(_parse_tool(raw) for raw in tools),
            service_endpoints=tuple(
                ServiceEndpoint(name, url)
                for name, url in _parse_pairs(endpoints, "--endpoint").items()
            ),
        )
    with workspace.locked():
        _, key, document = generate_identity(seed.encode(), profile=profile, now=now)
        workspace.save_key(key)
        workspace.save_document(document)
    _emit(ctx, document.to_value(), text=f"did: {document.did.render()}\nkey: {key.key_id}")


@id_group.command(name="show")
@click.argument("did")
@click.pass_context
@_mapped
def id_show(ctx: click.Context, did: str) -> None:
    """Print a stored identity document."""
    workspace = _workspace(ctx)
    document = workspace.load_document(did)
    _emit(ctx, document.to_value())


@id_group.command(name="rotate")
@click.argument("did")
@click.option("--seed", required=True, help="Seed for the replacement key.")
@click.option("--fragment", default="key-2", show_default=True)
@click.option("--now", type=int, required=True)
@click.pass_context
@_mapped
def id_rotate(ctx: click.Context, did: str, seed: str, fragment: str, now: int) -> None:
    """Add a controller-authorized verification method to a document."""
    workspace = _workspace(ctx)
    with workspace.locked():
        document = workspace.load_document(did)
        key = KeyPair.from_seed(seed.encode(), key_id=f"{did}#{fragment}")
        method = VerificationMethod(key.key_id, key.public_key, ALGORITHM)
        updated = update_document(
            document,
            {"addVerificationMethod": method},
            workspace.controller_key(document),
            now,
        )
        workspace.save_key(key)
        workspace.save_document(updated)
    _emit(ctx, updated.to_value(), text=f"added {key.key_id}")


@id_group.command(name="deactivate")
@click.argument("did")
@click.option("--now", type=int, required=True)
@click.pass_context
@_mapped
def id_deactivate(ctx: click.Context, did: str, now: int) -> None:
    """Revoke an identity; the document becomes terminal."""
    workspace = _workspace(ctx)
    with workspace.locked():
        document = workspace.load_document(did)
        updated = deactivate(document, workspace.controller_key(document), now)
        workspace.save_document(updated)
    _emit(
        ctx,
        updated.to_value(),
        text=f"{did} is now {updated.lifecycle_status.value}",
    )


# ── vc ───────────────────────────────────────────────────────────────


@main.group(name="vc")
def vc_group() -> None:
    """Issue, verify, revoke, and present credentials."""


def _issue_salt_source(workspace: Workspace, material: Mapping[str, Any]):
    # Same workspace, same inputs, same salts: reproducible issuance.
    digest = sha3_256(
        str(workspace.config["seed"]).encode() + canonical_bytes(material)
    )
    rng = random.Random(int.from_bytes(digest, "big"))
    return lambda: rng.randbytes(32)


@vc_group.command(name="issue")
@click.option("--issuer", required=True)
@click.option("--subject", required=True)
@click.option("--type", "types", multiple=True, required=True)
@click.option("--claim", "claims", multiple=True, help="key=value, repeatable.")
@click.option("--valid-from", type=int, required=True)
@click.option("--valid-until", type=int, default=None)
@click.option("--revocable", is_flag=True, help="Attach a status-list slot.")
@click.option("--id", "credential_id", default=None)
@click.pass_context
@_mapped
def vc_issue(
    ctx: click.Context,
    issuer: str,
    subject: str,
    types: tuple[str, ...],
    claims: tuple[str, ...],
    valid_from: int,
    valid_until: Optional[int],
    revocable: bool,
    credential_id: Optional[str],
) -> None:
    """Issue a credential from a stored issuer identity."""
    workspace = _workspace(ctx)
    claim_map = _parse_pairs(claims, "--claim")
    with workspace.locked():
        issuer_doc = workspace.load_document(issuer)
        issuer_key = workspace.load_key(f"{issuer}#key-1")
        status_ref = None
        if revocable:
            list_id = f"{issuer}/status/1"
            store = workspace.status_store()
            try:
                status_list = store.get(list_id)
            except NotFoundError:
                status_list = new_status_list(list_id, issuer_doc, issuer_key, size=64)
                workspace.save_status_list(status_list)
            taken = sum(
                1
                for stored in workspace.credentials()
                if stored.status_ref is not None
                and stored.status_ref.status_list_id == list_id
            )
            status_ref = StatusRef(list_id, taken)
        material = {
            "issuer": issuer,
            "subject": subject,
            "types": list(types),
            "claims": claim_map,
            "validFrom": valid_from,
            "validUntil": valid_until,
            "id": credential_id,
        }
        credential = issue(
            issuer_doc,
            issuer_key,
            subject,
            types,
            claim_map,
            valid_from,
            valid_until=valid_until,
            status_ref=status_ref,
            credential_id=credential_id,
            salt_source=_issue_salt_source(workspace, material),
        )
        workspace.save_credential(credential)
    _emit(ctx, credential.to_value(), text=f"issued {credential.credential_id}")


@vc_group.command(name="verify")
@click.argument("credential_id", required=False)
@click.option("--file", "path", type=click.Path(exists=True), default=None)
@click.option("--now", type=int, default=0, show_default=True)
@click.option("--trusted-issuer", "trusted", multiple=True)
@click.pass_context
@_mapped
def vc_verify(
    ctx: click.Context,
    credential_id: Optional[str],
    path: Optional[str],
    now: int,
    trusted: tuple[str, ...],
) -> None:
    """Verify a stored credential (or one read from --file)."""
    workspace = _workspace(ctx)
    if (credential_id is None) == (path is None):
        raise Failure("give exactly one of CREDENTIAL_ID or --file", EXIT_USAGE)
    if path is not None:
        credential = VerifiableCredential.from_value(
            canonical_loads(Path(path).read_bytes())
        )
    else:
        credential = workspace.load_credential(credential_id)
    allow = tuple(trusted) or tuple(workspace.config["trustedIssuers"]) or None
    result = verify_credential(
        credential,
        workspace.resolver(),
        workspace.status_store(),
        now,
        trusted_issuers=allow,
    )
    value = {
        "credentialId": credential.credential_id,
        "valid": result.valid,
        "reasons": [reason.value for reason in result.reasons],
    }
    if not result.valid:
        _emit(ctx, value, text="invalid: " + ", ".join(value["reasons"]))
        ctx.exit(EXIT_VERIFY)
    _emit(ctx, value, text=f"valid: {credential.credential_id}")


@vc_group.command(name="revoke")
@click.argument("credential_id")
@click.pass_context
@_mapped
def vc_revoke(ctx: click.Context, credential_id: str) -> None:
    """Flip the credential's status-list bit; verifiers see it immediately."""
    workspace = _workspace(ctx)
    with workspace.locked():
        credential = workspace.load_credential(credential_id)
        if credential.status_ref is None:
            raise Failure(f"{credential_id} was issued without a status slot", EXIT_USAGE)
        store = workspace.status_store()
        status_list = store.get(credential.status_ref.status_list_id)
        owner_key = workspace.load_key(f"{credential.issuer}#key-1")
        updated = revoke_index(status_list, credential.status_ref.index, owner_key)
        workspace.save_status_list(updated)
    _emit(
        ctx,
        {
            "statusListId": updated.list_id,
            "index": credential.status_ref.index,
            "version": updated.version,
        },
        text=f"revoked {credential_id} (list {updated.list_id} v{updated.version})",
    )


@vc_group.command(name="present")
@click.option("--holder", required=True)
@click.option("--credential", "credential_ids", multiple=True, required=True)
@click.option(
    "--disclose",
    "disclosures",
    multiple=True,
    help="credentialId:claimA,claimB — default is every claim.",
)
@click.option("--nonce", required=True)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
@_mapped
def vc_present(
    ctx: click.Context,
    holder: str,
    credential_ids: tuple[str, ...],
    disclosures: tuple[str, ...],
    nonce: str,
    out: Optional[str],
) -> None:
    """Build a holder-signed selective-disclosure presentation."""
    workspace = _workspace(ctx)
    credentials = [workspace.load_credential(cid) for cid in credential_ids]
    disclose: dict[str, tuple[str, ...]] = {
        c.credential_id: tuple(c.claims) for c in credentials
    }
    for raw in disclosures:
        cid, sep, claim_list = raw.partition(":")
        if not sep:
            raise Failure(f"--disclose expects id:claims, got {raw!r}", EXIT_USAGE)
        disclose[cid] = tuple(c for c in claim_list.split(",") if c)
    holder_key = workspace.load_key(f"{holder}#key-1")
    presentation = present(holder_key, credentials, disclose, nonce.encode())
    if out is not None:
        Path(out).write_bytes(presentation.canonical())
    _emit(
        ctx,
        presentation.to_value(),
        text=f"presentation by {holder} over {len(credentials)} credential(s)",
    )


# ── ans ──────────────────────────────────────────────────────────────


@main.group(name="ans")
def ans_group() -> None:
    """Agent name-service records and capability resolution."""


@ans_group.command(name="register")
@click.option("--name", "ans_name", required=True)
@click.option("--did", required=True)
@click.option("--endpoint", required=True)
@click.option("--capability", "capabilities", multiple=True, required=True)
@click.option("--protocol-extension", "extensions", multiple=True, help="key=value.")
@click.option("--attestation", "attestations", multiple=True, help="Credential id.")
@click.option("--offline", is_flag=True, help="Register as not accepting jobs.")
@click.pass_context
@_mapped
def ans_register(
    ctx: click.Context,
    ans_name: str,
    did: str,
    endpoint: str,
    capabilities: tuple[str, ...],
    extensions: tuple[str, ...],
    attestations: tuple[str, ...],
    offline: bool,
) -> None:
    """Bind a versioned name to a resolvable agent."""
    workspace = _workspace(ctx)
    with workspace.locked():
        registry = workspace.registry()
        record = registry.register(
            ans_name,
            did,
            endpoint,
            capabilities,
            protocol_extensions=_parse_pairs(extensions, "--protocol-extension"),
            attestation_refs=tuple(attestations),
            live=not offline,
        )
        workspace.save_registry(registry)
    _emit(ctx, record.to_value(), text=f"registered {record.ans_name.render()}")


@ans_group.command(name="resolve")
@click.option("--capability", required=True)
@click.option("--pattern", default=None, help="Name pattern; switches query mode.")
@click.option("--protocol", default=None)
@click.option("--provider", default=None)
@click.option("--version", "version_range", default=None)
@click.option("--attestation", "attestations", multiple=True, help="Required type.")
@click.option("--availability", default=None)
@click.option("--now", type=int, default=0, show_default=True)
@click.pass_context
@_mapped
def ans_resolve(
    ctx: click.Context,
    capability: str,
    pattern: Optional[str],
    protocol: Optional[str],
    provider: Optional[str],
    version_range: Optional[str],
    attestations: tuple[str, ...],
    availability: Optional[str],
    now: int,
) -> None:
    """Resolve agents by capability, optionally narrowed by name pattern."""
    workspace = _workspace(ctx)
    mode = QueryMode.BY_NAME_AND_CAPABILITY if pattern else QueryMode.BY_CAPABILITY
    query = AnsQuery(
        mode=mode,
        required_capability=capability,
        desired_protocol=protocol,
        preferred_provider=provider,
        version_range=version_range,
        required_attestations=tuple(attestations),
        ans_name_pattern=pattern,
        availability_requirement=availability,
    )
    response = workspace.registry().resolve(query, now)
    value = response.to_value()
    count = len(value["resolvedAgents"])
    _emit(ctx, value, text=f"status: {value['resolutionStatus']}\nagents: {count}")


@ans_group.command(name="deregister")
@click.argument("target")
@click.pass_context
@_mapped
def ans_deregister(ctx: click.Context, target: str) -> None:
    """Mark records revoked by name or by agent DID."""
    workspace = _workspace(ctx)
    with workspace.locked():
        registry = workspace.registry()
        handle: Any = AgentDid.parse(target) if target.startswith("did:") else target
        removed = registry.deregister(handle)
        workspace.save_registry(registry)
    _emit(ctx, {"deregistered": removed}, text="\n".join(removed) or "nothing matched")


# ── policy ───────────────────────────────────────────────────────────


@main.group(name="policy")
def policy_group() -> None:
    """Load policy documents and evaluate access requests."""


@policy_group.command(name="load")
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True))
@click.pass_context
@_mapped
def policy_load(ctx: click.Context, files: tuple[str, ...]) -> None:
    """Validate and store policy documents (one or a list per file)."""
    workspace = _workspace(ctx)
    incoming: list[Any] = []
    for name in files:
        value = canonical_loads(Path(name).read_bytes())
        incoming.extend(value if isinstance(value, list) else [value])
    try:
        documents = [PolicyDocument.from_value(value) for value in incoming]
    except (TypeError, KeyError, ValueError, AttributeError) as exc:
        raise Failure(f"malformed policy document: {exc}", EXIT_USAGE)
    with workspace.locked():
        for document in documents:
            workspace.save_policy(document)
        workspace.policy_set()  # whole store must still load as one set
    loaded = [document.policy_id for document in documents]
    _emit(ctx, {"loaded": loaded}, text="\n".join(loaded))


@policy_group.command(name="eval")
@click.option("--request", "request_arg", required=True, help="JSON or @file.")
@click.option("--now", type=int, default=0, show_default=True)
@click.option("--risk/--no-risk", default=True, show_default=True)
@click.pass_context
@_mapped
def policy_eval(ctx: click.Context, request_arg: str, now: int, risk: bool) -> None:
    """Evaluate one access request document and print the decision.

    The document names the agent, resource, and action, plus optional
    context, session view, resource attributes, stored credential ids,
    and per-credential claim disclosure.
    """
    workspace = _workspace(ctx)
    request_doc = _document_arg(request_arg)
    if not isinstance(request_doc, Mapping):
        raise Failure("request document must be an object", EXIT_USAGE)
    try:
        agent_did = request_doc["agentDid"]
        resource_id = request_doc["resourceId"]
        action = request_doc["action"]
    except KeyError as exc:
        raise Failure(f"request document missing {exc}", EXIT_USAGE)

    resolver = workspace.resolver()
    store = workspace.status_store()
    allow = tuple(workspace.config["trustedIssuers"]) or None
    disclose = request_doc.get("disclose", {})
    disclosed = []
    for cid in request_doc.get("credentials", ()):
        credential = workspace.load_credential(cid)
        result = verify_credential(
            credential, resolver, store, now, trusted_issuers=allow
        )
        if not result.valid:
            reasons = ", ".join(reason.value for reason in result.reasons)
            raise Failure(f"credential {cid} failed verification: {reasons}", EXIT_VERIFY)
        keep = tuple(disclose.get(cid, credential.claims))
        disclosed.append(
            DisclosedCredential(
                credential_id=credential.credential_id,
                types=credential.types,
                issuer=credential.issuer,
                subject=credential.subject,
                claims={k: credential.claims[k] for k in keep},
            )
        )

    access_request = gather_attributes(
        resolver,
        {resource_id: request_doc.get("resource", {})},
        agent_did=agent_did,
        credentials=disclosed,
        resource_id=resource_id,
        action=action,
        session=request_doc.get("session"),
        resource_params=request_doc.get("resourceParams"),
        tick=now,
        context_extra=request_doc.get("context"),
    )
    policy_set = workspace.policy_set()
    if risk:
        decision = evaluate_with_risk(access_request, policy_set, DEFAULT_RISK_RULES)
    else:
        decision = evaluate(access_request, policy_set)
    summary = decision.to_value()
    text = f"outcome: {summary['outcome']}"
    if decision.allowed:
        text += f"\npolicy: {summary['matchedPolicyId']}"
        if summary["obligations"]:
            text += "\nobligations: " + ", ".join(summary["obligations"])
    _emit(ctx, summary, text=text)
    if not decision.allowed:
        ctx.exit(EXIT_DENY)


# ── scenario ─────────────────────────────────────────────────────────


@main.group(name="scenario")
def scenario_group() -> None:
    """Deterministic multi-agent simulations."""


@scenario_group.command(name="run")
@click.argument("target")
@click.option("--param", "params", multiple=True, help="key=value overrides.")
@click.option("--audit", "audit_out", type=click.Path(), default=None)
@click.pass_context
@_mapped
def scenario_run(
    ctx: click.Context, target: str, params: tuple[str, ...], audit_out: Optional[str]
) -> None:
    """Run a built-in scenario by name, or one described by a file."""
    workspace = _workspace(ctx)
    overrides = _parse_pairs(params, "--param")
    if target in BUILTIN_SCENARIOS:
        scenario = builtin_scenario(target, overrides or None)
    elif Path(target).is_file():
        scenario = load_scenario_file(Path(target))
    else:
        raise Failure(
            f"{target!r} is neither a built-in scenario nor a file", EXIT_USAGE
        )
    # Logs written from here are signed with the workspace authority so
    # `audit verify --log` can check them without extra key plumbing.
    report, _ = execute(
        scenario,
        audit_path=Path(audit_out) if audit_out else None,
        audit_key=workspace.load_key(workspace.config["auditKeyId"]),
    )
    _emit(ctx, report.to_value(), text=report.to_text())
    if not report.passed:
        ctx.exit(EXIT_VERIFY)


# ── audit ────────────────────────────────────────────────────────────


@main.group(name="audit")
def audit_group() -> None:
    """Verify and query hash-chained audit logs."""


def _log_path(workspace: Workspace, override: Optional[str]) -> Path:
    return Path(override) if override else workspace.audit_path


@audit_group.command(name="verify")
@click.option("--log", "log_override", type=click.Path(exists=True), default=None)
@click.option("--public-key", "public_key_hex", default=None, help="Hex override.")
@click.pass_context
@_mapped
def audit_verify(
    ctx: click.Context, log_override: Optional[str], public_key_hex: Optional[str]
) -> None:
    """Recompute the chain and compare it against the head sidecar."""
    workspace = _workspace(ctx)
    path = _log_path(workspace, log_override)
    public_key = (
        bytes.fromhex(public_key_hex)
        if public_key_hex
        else workspace.audit_public_key()
    )
    ok, first_bad = verify_log_file(path, public_key)
    if not ok:
        _emit(
            ctx,
            {"valid": False, "firstCorruptIndex": first_bad},
            text=f"chain broken at entry {first_bad}",
        )
        ctx.exit(EXIT_INTEGRITY)
    entries = load_log(path)
    head = read_head(path)
    if head is not None and entries:
        from .audit import entry_hash

        if head["headHash"] != to_hex(entry_hash(entries[-1])) or head["entryCount"] != len(entries):
            _emit(
                ctx,
                {"valid": False, "firstCorruptIndex": None, "headMismatch": True},
                text="head sidecar does not match the log",
            )
            ctx.exit(EXIT_INTEGRITY)
    _emit(
        ctx,
        {"valid": True, "entries": len(entries)},
        text=f"ok ({len(entries)} entries)",
    )


@audit_group.command(name="report")
@click.option("--description", required=True)
@click.option("--scope", "scope_arg", required=True, help="Predicate list, JSON or @file.")
@click.option("--requirement", "requirement_arg", required=True, help="Predicate list.")
@click.option("--nonce", required=True)
@click.option("--approved-issuer", "approved", multiple=True)
@click.option("--log", "log_override", type=click.Path(exists=True), default=None)
@click.pass_context
@_mapped
def audit_report(
    ctx: click.Context,
    description: str,
    scope_arg: str,
    requirement_arg: str,
    nonce: str,
    approved: tuple[str, ...],
    log_override: Optional[str],
) -> None:
    """Build a signed compliance report over the stored log."""
    workspace = _workspace(ctx)
    entries = load_log(_log_path(workspace, log_override))
    report = build_compliance_report(
        entries,
        description=description,
        scope=_document_arg(scope_arg),
        requirement=_document_arg(requirement_arg),
        approved_issuers=tuple(approved),
        auditor_nonce=nonce,
        authority=workspace.load_key(workspace.config["auditKeyId"]),
    )
    value = report.to_value()
    _emit(
        ctx,
        value,
        text=(
            f"{value['matchedCount']} matched, "
            f"{value['violationCount']} violation(s)"
        ),
    )


@audit_group.command(name="provenance")
@click.argument("start_ref")
@click.option("--log", "log_override", type=click.Path(exists=True), default=None)
@click.pass_context
@_mapped
def audit_provenance(ctx: click.Context, start_ref: str, log_override: Optional[str]) -> None:
    """Walk task, job, and message links backward from one reference."""
    workspace = _workspace(ctx)
    entries = load_log(_log_path(workspace, log_override))
    chain = build_provenance(entries, start_ref)
    value = chain.to_value()
    lines = [
        f"{entry['tick']:>6}  {entry['agentDid']}  {entry['actionPerformed']}"
        for entry in value["entries"]
    ]
    _emit(ctx, value, text="\n".join(lines) or "no linked entries")


if __name__ == "__main__":
    main()
