"""Command line: exit-code classes, wire-exact output, and the rule that
every command is a thin composition whose effect is reproducible through
direct module calls."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from agentiam.canonical import canonical_bytes, canonical_loads
from agentiam.cli import main
from agentiam.credentials import present as module_present
from agentiam.credentials import verify_credential
from agentiam.harness import builtin_scenario, execute
from agentiam.identity import generate_identity
from agentiam.policy import DEFAULT_RISK_RULES, evaluate_with_risk, gather_attributes
from agentiam.workspace import Workspace

_POLICY = {
    "policyId": "demo.read#allow",
    "target": [
        {"attributePath": "resource.id", "operator": "equals", "value": "DB-1"},
        {"attributePath": "action", "operator": "equals", "value": "query"},
    ],
    "conditions": [
        {
            "attributePath": "agent.vcs[].claims.role",
            "operator": "equals",
            "value": "SeniorFinancialAnalyst",
        }
    ],
    "obligations": ["log_row_access"],
}


@pytest.fixture()
def cli(tmp_path):
    runner = CliRunner()
    root = str(tmp_path / "ws")

    def invoke(*args, expect=0, fmt=None):
        argv = ["--root", root]
        if fmt:
            argv += ["--format", fmt]
        result = runner.invoke(main, argv + list(args))
        assert result.exit_code == expect, (
            f"{args} exited {result.exit_code}, wanted {expect}\n{result.output}"
        )
        return result

    invoke("init", "--seed", "5")
    return invoke, Path(root)


def _canonical(result):
    return canonical_loads(result.output.strip().encode())


def _new_agent(invoke, seed, *extra):
    result = invoke("id", "new", "--seed", seed, *extra)
    return result.output.split()[1]


# ── workspace and identities ────────────────────────────────────────────


def test_init_refuses_an_existing_workspace(cli):
    invoke, _ = cli
    invoke("init", expect=2)


def test_missing_workspace_is_a_usage_error(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, ["--root", str(tmp_path / "void"), "id", "new", "--seed", "x"])
    assert result.exit_code == 2


def test_workspace_env_var_override(cli):
    invoke, root = cli
    runner = CliRunner()
    result = runner.invoke(
        main, ["id", "new", "--seed", "via-env"], env={"AGENTIAM_WORKSPACE": str(root)}
    )
    assert result.exit_code == 0 and "did:" in result.output


def test_id_new_matches_the_module_generated_document(cli):
    invoke, root = cli
    result = invoke(
        "id", "new", "--seed", "alice", "--scope", "Analytics",
        "--tool", "SQLConnector:Sales,Marketing", "--now", "4",
        fmt="canonical",
    )
    shown = _canonical(result)
    did = shown["did"]
    stored = Workspace(root).load_document(did)
    assert canonical_bytes(shown) == stored.canonical()
    # Replay through the library: same seed must rebuild the same document.
    from agentiam.identity import CapabilityProfile, ServiceEndpoint, ToolGrant

    profile = CapabilityProfile(
        scope_of_behavior=("Analytics",),
        toolset=(ToolGrant("SQLConnector", ("Sales", "Marketing")),),
        service_endpoints=(),
    )
    _, _, rebuilt = generate_identity(b"alice", profile=profile, now=4)
    assert rebuilt.canonical() == stored.canonical()


def test_id_show_rotate_deactivate(cli):
    invoke, root = cli
    did = _new_agent(invoke, "bob")
    shown = _canonical(invoke("id", "show", did, fmt="canonical"))
    assert shown["did"] == did

    rotated = _canonical(
        invoke("id", "rotate", did, "--seed", "bob-2", "--now", "3", fmt="canonical")
    )
    key_ids = [m["keyId"] for m in rotated["verificationMethod"]]
    assert key_ids == [f"{did}#key-1", f"{did}#key-2"]

    gone = _canonical(invoke("id", "deactivate", did, "--now", "5", fmt="canonical"))
    assert gone["lifecycleStatus"] == "revoked"
    invoke("id", "deactivate", did, "--now", "6", expect=2)  # terminal state
    invoke("id", "show", "did:agentlab:nosuch", expect=2)


def test_locked_workspace_refuses_mutating_commands(cli):
    invoke, root = cli
    (root / ".lock").touch()
    invoke("id", "new", "--seed", "nope", expect=2)
    (root / ".lock").unlink()
    invoke("id", "new", "--seed", "yes")


# ── credentials ─────────────────────────────────────────────────────────


def _issue_role(invoke, issuer, subject, *extra):
    result = invoke(
        "vc", "issue", "--issuer", issuer, "--subject", subject,
        "--type", "RoleCredential", "--claim", "role=SeniorFinancialAnalyst",
        "--valid-from", "0", "--valid-until", "100", *extra,
    )
    return result.output.split()[-1]


def test_vc_issue_verify_and_window_edges(cli):
    invoke, root = cli
    issuer = _new_agent(invoke, "hr")
    agent = _new_agent(invoke, "worker")
    cred_id = _issue_role(invoke, issuer, agent)

    invoke("vc", "verify", cred_id, "--now", "0")
    invoke("vc", "verify", cred_id, "--now", "100")
    result = invoke("vc", "verify", cred_id, "--now", "101", expect=3)
    assert "expired" in result.output

    # The CLI's verdict is the library's verdict on the stored bytes.
    workspace = Workspace(root)
    credential = workspace.load_credential(cred_id)
    direct = verify_credential(
        credential, workspace.resolver(), workspace.status_store(), 101
    )
    assert not direct.valid and direct.reasons[0].value == "expired"


def test_vc_issue_is_deterministic_per_workspace_inputs(tmp_path):
    outputs = []
    for attempt in ("a", "b"):
        runner = CliRunner()
        root = str(tmp_path / attempt)
        base = ["--root", root]
        assert runner.invoke(main, base + ["init", "--seed", "9"]).exit_code == 0
        issuer = runner.invoke(
            main, base + ["id", "new", "--seed", "hr"]
        ).output.split()[1]
        agent = runner.invoke(
            main, base + ["id", "new", "--seed", "worker"]
        ).output.split()[1]
        result = runner.invoke(
            main,
            base + ["--format", "canonical", "vc", "issue", "--issuer", issuer,
                    "--subject", agent, "--type", "RoleCredential",
                    "--claim", "role=Analyst", "--valid-from", "0"],
        )
        assert result.exit_code == 0
        outputs.append(result.output)
    assert outputs[0] == outputs[1]


def test_vc_revoke_flips_the_status_bit(cli):
    invoke, _ = cli
    issuer = _new_agent(invoke, "hr")
    agent = _new_agent(invoke, "worker")
    cred_id = _issue_role(invoke, issuer, agent, "--revocable")
    invoke("vc", "verify", cred_id, "--now", "1")
    invoke("vc", "revoke", cred_id)
    result = invoke("vc", "verify", cred_id, "--now", "1", expect=3)
    assert "revoked" in result.output

    plain = _issue_role(invoke, issuer, agent, "--id", "vc:demo:plain")
    invoke("vc", "revoke", plain, expect=2)  # no status slot to flip


def test_vc_verify_trusted_issuer_allowlist(cli):
    invoke, _ = cli
    issuer = _new_agent(invoke, "hr")
    agent = _new_agent(invoke, "worker")
    cred_id = _issue_role(invoke, issuer, agent)
    invoke("vc", "verify", cred_id, "--now", "1", "--trusted-issuer", issuer)
    result = invoke(
        "vc", "verify", cred_id, "--now", "1",
        "--trusted-issuer", "did:agentlab:someoneelse", expect=3,
    )
    assert "untrusted-issuer" in result.output


def test_vc_present_matches_a_direct_module_presentation(cli):
    invoke, root = cli
    issuer = _new_agent(invoke, "hr")
    agent = _new_agent(invoke, "worker")
    cred_id = _issue_role(invoke, issuer, agent)
    out = root / "presentation.json"
    invoke(
        "vc", "present", "--holder", agent, "--credential", cred_id,
        "--disclose", f"{cred_id}:role", "--nonce", "n-42", "--out", str(out),
    )
    workspace = Workspace(root)
    rebuilt = module_present(
        workspace.load_key(f"{agent}#key-1"),
        [workspace.load_credential(cred_id)],
        {cred_id: ("role",)},
        nonce=b"n-42",
    )
    assert out.read_bytes() == rebuilt.canonical()


# ── name service ────────────────────────────────────────────────────────


def test_ans_register_resolve_deregister_round_trip(cli):
    invoke, root = cli
    agent = _new_agent(invoke, "bot")
    invoke(
        "ans", "register",
        "--name", "acp://Bot.FinancialRiskAnalysis.Acme.v2.1.3.prod",
        "--did", agent, "--endpoint", "https://svc.invalid/bot",
        "--capability", "FinancialRiskAnalysis.CorporateReporting",
        "--protocol-extension", "supported_protocols=[\"acp\"]",
    )
    result = invoke(
        "ans", "resolve",
        "--capability", "FinancialRiskAnalysis.CorporateReporting",
        "--version", ">=2.1.0 <3.0.0", "--protocol", "acp",
        fmt="canonical",
    )
    response = _canonical(result)
    assert response["resolutionStatus"] == "success"
    entry = response["resolvedAgents"][0]
    assert set(entry) == {
        "ansName", "agentDid", "serviceEndpoint", "protocolExtensions",
        "relevantVcSnippets", "ansRecordSignature",
    }
    assert entry["agentDid"] == agent

    # Same query through the library against the stored registry state.
    from agentiam.ans import AnsQuery, QueryMode

    direct = Workspace(root).registry().resolve(
        AnsQuery(
            mode=QueryMode.BY_CAPABILITY,
            required_capability="FinancialRiskAnalysis.CorporateReporting",
            desired_protocol="acp",
            version_range=">=2.1.0 <3.0.0",
        ),
        0,
    )
    assert canonical_bytes(direct.to_value()) == canonical_bytes(response)

    invoke("ans", "deregister", agent)
    after = _canonical(
        invoke("ans", "resolve", "--capability",
               "FinancialRiskAnalysis.CorporateReporting", fmt="canonical")
    )
    assert after["resolutionStatus"] == "not-found"
    invoke("ans", "deregister", agent)  # idempotent on revoked records
    invoke("ans", "deregister", "did:agentlab:" + "c" * 52, expect=2)


def test_ans_register_unknown_did_is_refused(cli):
    invoke, _ = cli
    invoke(
        "ans", "register", "--name", "a2a://Ghost.Haunting.Nowhere.v1.0.0.prod",
        "--did", "did:agentlab:" + "b" * 52, "--endpoint", "https://x.invalid",
        "--capability", "Haunting", expect=2,
    )


# ── policy ──────────────────────────────────────────────────────────────


def _eval_request(invoke, root, request, expect=0):
    path = root / "request.json"
    path.write_text(json.dumps(request))
    return invoke(
        "policy", "eval", "--request", f"@{path}", "--now", "4",
        fmt="canonical", expect=expect,
    )


def test_policy_load_eval_allow_deny_and_replay(cli):
    invoke, root = cli
    issuer = _new_agent(invoke, "hr")
    agent = _new_agent(invoke, "worker")
    cred_id = _issue_role(invoke, issuer, agent)
    policy_file = root / "policy.json"
    policy_file.write_text(json.dumps([_POLICY]))
    invoke("policy", "load", str(policy_file))

    request = {
        "agentDid": agent,
        "resourceId": "DB-1",
        "action": "query",
        "credentials": [cred_id],
        "resource": {"tags": {"sensitivity": "High"}},
    }
    allowed = _canonical(_eval_request(invoke, root, request))
    assert allowed["outcome"] == "allow"
    assert allowed["matchedPolicyId"] == "demo.read#allow"
    assert allowed["obligations"] == ["log_row_access"]

    denied = _canonical(_eval_request(invoke, root, dict(request, action="drop"), expect=4))
    assert denied["outcome"] == "deny"

    # Replay the allow through direct module calls and diff the decisions.
    workspace = Workspace(root)
    credential = workspace.load_credential(cred_id)
    resolver = workspace.resolver()
    from agentiam.credentials import DisclosedCredential

    disclosed = DisclosedCredential(
        credential_id=credential.credential_id,
        types=credential.types,
        issuer=credential.issuer,
        subject=credential.subject,
        claims=dict(credential.claims),
    )
    direct = evaluate_with_risk(
        gather_attributes(
            resolver,
            {"DB-1": {"tags": {"sensitivity": "High"}}},
            agent_did=agent,
            credentials=[disclosed],
            resource_id="DB-1",
            action="query",
            tick=4,
        ),
        workspace.policy_set(),
        DEFAULT_RISK_RULES,
    )
    assert canonical_bytes(direct.to_value()) == canonical_bytes(allowed)


def test_policy_eval_rejects_invalid_credentials(cli):
    invoke, root = cli
    issuer = _new_agent(invoke, "hr")
    agent = _new_agent(invoke, "worker")
    cred_id = _issue_role(invoke, issuer, agent, "--revocable")
    invoke("vc", "revoke", cred_id)
    policy_file = root / "policy.json"
    policy_file.write_text(json.dumps([_POLICY]))
    invoke("policy", "load", str(policy_file))
    request = {
        "agentDid": agent, "resourceId": "DB-1", "action": "query",
        "credentials": [cred_id],
    }
    result = _eval_request(invoke, root, request, expect=3)
    assert "revoked" in result.output


def test_policy_load_rejects_malformed_documents(cli):
    invoke, root = cli
    bad = root / "bad.json"
    bad.write_text(json.dumps([{"policyId": "x", "conditions": "not-a-list"}]))
    invoke("policy", "load", str(bad), expect=2)


# ── scenario ────────────────────────────────────────────────────────────


def test_scenario_run_builtin_produces_the_library_report(cli):
    invoke, root = cli
    result = invoke("scenario", "run", "fig2_discovery_authz", fmt="canonical")
    shown = _canonical(result)
    workspace = Workspace(root)
    direct, _ = execute(
        builtin_scenario("fig2_discovery_authz"),
        audit_key=workspace.load_key(workspace.config["auditKeyId"]),
    )
    assert canonical_bytes(shown) == canonical_bytes(direct.to_value())
    assert shown["metrics"]["enforcementAccuracy"]["percent"] == 100


def test_scenario_run_from_file_with_parameters(cli):
    invoke, root = cli
    spec_file = root / "run.json"
    spec_file.write_text(
        json.dumps(
            {"scenario": "incident_lockout",
             "parameters": {"seed": 12, "pull_interval": 4}}
        )
    )
    result = invoke("scenario", "run", str(spec_file), fmt="canonical")
    shown = _canonical(result)
    assert shown["parameters"]["pullInterval"] == 4
    assert shown["passed"] is True


def test_scenario_run_param_overrides(cli):
    invoke, _ = cli
    result = invoke(
        "scenario", "run", "incident_lockout",
        "--param", "pull_interval=2", "--param", "compromise_tick=5",
        fmt="canonical",
    )
    shown = _canonical(result)
    assert shown["metrics"]["revocationTimeTicks"] == 1


def test_scenario_run_usage_errors(cli):
    invoke, _ = cli
    invoke("scenario", "run", "no_such_thing", expect=2)
    invoke("scenario", "run", "incident_lockout", "--param", "bogus=1", expect=2)


def test_scenario_run_failure_exits_three(cli, monkeypatch):
    invoke, _ = cli

    class StubReport:
        passed = False

        def to_value(self):
            return {"passed": False}

        def to_text(self):
            return "scenario: stub\nresult: FAIL"

    import agentiam.cli as cli_module

    monkeypatch.setattr(cli_module, "execute", lambda s, **kw: (StubReport(), None))
    invoke("scenario", "run", "fig2_discovery_authz", expect=3)


# ── audit ───────────────────────────────────────────────────────────────


@pytest.fixture()
def scenario_log(cli):
    invoke, root = cli
    log = root / "fig3.log"
    invoke("scenario", "run", "fig3_jit_mcp", "--audit", str(log))
    return invoke, root, log


def test_audit_verify_ok_then_detects_tamper(scenario_log):
    invoke, root, log = scenario_log
    result = invoke("audit", "verify", "--log", str(log))
    assert "35 entries" in result.output

    lines = log.read_bytes().split(b"\n")
    flipped = bytearray(lines[2])
    flipped[25] ^= 1
    lines[2] = bytes(flipped)
    log.write_bytes(b"\n".join(lines))
    result = invoke("audit", "verify", "--log", str(log), expect=5)
    assert "entry 2" in result.output


def test_audit_verify_detects_head_sidecar_mismatch(scenario_log):
    invoke, root, log = scenario_log
    sidecar = Path(str(log) + ".head")
    head = canonical_loads(sidecar.read_bytes().strip())
    head["entryCount"] += 1
    sidecar.write_bytes(canonical_bytes(head) + b"\n")
    result = invoke("audit", "verify", "--log", str(log), expect=5)
    assert "sidecar" in result.output


def test_audit_verify_empty_workspace_log(cli):
    invoke, _ = cli
    result = invoke("audit", "verify")
    assert "0 entries" in result.output


def test_audit_report_matches_module_report(scenario_log):
    invoke, root, log = scenario_log
    scope = '[{"attributePath":"entry.actionPerformed","operator":"equals","value":"McpInvoke"}]'
    requirement = '[{"attributePath":"entry.outcome.status","operator":"equals","value":"deliver"}]'
    result = invoke(
        "audit", "report", "--description", "tool calls end in delivery",
        "--scope", scope, "--requirement", requirement,
        "--nonce", "n-7", "--log", str(log), fmt="canonical",
    )
    shown = _canonical(result)
    assert (shown["matchedCount"], shown["violationCount"]) == (15, 3)

    from agentiam.audit import compliance_report, load_log

    workspace = Workspace(root)
    direct = compliance_report(
        load_log(log),
        description="tool calls end in delivery",
        scope=json.loads(scope),
        requirement=json.loads(requirement),
        auditor_nonce="n-7",
        authority=workspace.load_key(workspace.config["auditKeyId"]),
    )
    assert canonical_bytes(direct.to_value()) == canonical_bytes(shown)


def test_audit_provenance_walks_job_links(scenario_log):
    invoke, root, log = scenario_log
    result = invoke("audit", "provenance", "job-ephemeral-77a", "--log", str(log), fmt="canonical")
    shown = _canonical(result)
    assert shown["startRef"] == "job-ephemeral-77a"
    assert len(shown["entries"]) > 0

    from agentiam.audit import extract_provenance, load_log

    direct = extract_provenance(load_log(log), "job-ephemeral-77a")
    assert canonical_bytes(direct.to_value()) == canonical_bytes(shown)
    invoke("audit", "provenance", "ref-that-never-was", "--log", str(log), expect=2)
