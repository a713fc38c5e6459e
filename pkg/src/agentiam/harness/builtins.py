"""Built-in scenarios.

Six end-to-end scripts covering the framework's main flows: credential-
gated discovery and data access, just-in-time tool passes, signed
cross-org alerts, incident lockout with bounded revocation lag,
risk-adaptive payment limits under degraded trust, and peer reputation
feedback.  Each is deterministic under its seed and expected to pass
with enforcement accuracy 100.
"""

from __future__ import annotations

import random
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

from ..ans import AnsQuery, QueryMode
from ..canonical import canonical_loads
from ..credentials import Proof, present, verify_credential
from ..errors import ScenarioError
from ..identity import ToolGrant, generate_identity
from ..policy import PathRef, PolicyDocument, Predicate
from ..sessions import SECURITY_LOCKOUT_REASON
from .adapters import JIT_BINDING_RULE_ID, ProtocolAdapter, RequestFacts
from .messages import A2AMessage, McpCall, build_a2a_message, build_mcp_call
from .monitor import apply_anomalies, baseline_monitor
from .scenario import Scenario, Step
from .world import World

__all__ = ["BUILTIN_SCENARIOS", "builtin_scenario", "load_scenario_file"]


# ── shared step helpers ─────────────────────────────────────────────────

def _present_all(actor, labels, message_id: str):
    credentials = [actor.credential(label) for label in labels]
    disclose = {c.credential_id: tuple(c.claims) for c in credentials}
    return present(actor.key, credentials, disclose, nonce=message_id.encode("utf-8"))


def _send(
    world: World,
    sender: str,
    adapter_id: str,
    recipient_did: str,
    *,
    message_id: str,
    payload: Mapping[str, Any],
    labels: tuple[str, ...] = (),
    payload_key: Optional[str] = None,
    corrupt: bool = False,
) -> dict[str, Any]:
    actor = world.actor(sender)
    presentations = (_present_all(actor, labels, message_id),) if labels else ()
    message = build_a2a_message(
        actor.key,
        message_id=message_id,
        sender_did=actor.did,
        recipient_did=recipient_did,
        tick=world.clock.now,
        payload=payload,
        presentations=presentations,
        payload_key=actor.keys[payload_key] if payload_key else None,
    )
    if corrupt:
        broken = bytearray(message.message_signature.signature)
        broken[0] ^= 0x01
        message = replace(
            message,
            message_signature=Proof(
                key_id=message.message_signature.key_id, signature=bytes(broken)
            ),
        )
    return world.adapters[adapter_id].deliver(message, world.clock.now).observed()


_DELIVERED = {"decision": "deliver", "stage": "delivered"}


def _allow(policy_id: str, obligations: tuple[str, ...] = ()) -> dict[str, Any]:
    return {**_DELIVERED, "policyId": policy_id, "obligations": list(obligations)}


def _deny(stage: str, reason: str, failed=None) -> dict[str, Any]:
    value: dict[str, Any] = {"decision": "deny", "stage": stage, "reason": reason}
    if failed is not None:
        value["failedPredicates"] = failed
    return value


# ── discovery and credential-gated data access ──────────────────────────

_RISK_BOT_DID = "did:com:acme:agent:riskanalyzer:beta-007"
_DECOY_BOT_DID = "did:com:acme:agent:riskanalyzer:gamma-012"
_ORCHESTRATOR_DID = "did:com:enterprise:agent:orchestrator:prime-001"
_HR_ISSUER_DID = "did:com:acme:hr:issuer"
_SOX_ISSUER_DID = "did:com:acme:audit:sox-issuer"
_RISK_BOT_NAME = "acp://RiskAnalyzerBot.FinancialRiskAnalysis.AcmeFinanceServices.v2.1.3.prod"
_DECOY_BOT_NAME = "acp://RiskAnalyzerBot.FinancialRiskAnalysis.AcmeFinanceServices.v2.1.0.staging"

_DISCOVERY_QUERY = AnsQuery(
    mode=QueryMode.BY_CAPABILITY,
    required_capability="FinancialRiskAnalysis.CorporateReporting",
    desired_protocol="acp",
    preferred_provider="AcmeFinanceServices",
    version_range=">=2.1.0",
    required_attestations=("SOXComplianceCertified",),
    availability_requirement="online_accepting_jobs",
)

_SALES_POLICY = PolicyDocument(
    policy_id="acme.data_access#allow",
    target=(
        Predicate("resource.id", "equals", "InternalDB-SalesFigures"),
        Predicate("action", "equals", "QUERY_TABLE"),
    ),
    conditions=(
        Predicate("agent.vcs[].claims.role", "equals", "FinancialRiskAnalystRole"),
        Predicate("agent.vcs[].claims.capability", "equals", "SalesDataAnalyticsCapability"),
        Predicate("agent.vcs[]", "containsType", "SOXComplianceCertified"),
        Predicate("agent.didDocument.toolset[].toolName", "equals", "SecureSQLConnector"),
        Predicate(
            "resource.schema",
            "memberOf",
            PathRef("agent.didDocument.toolset[].targetResources"),
        ),
        Predicate("resource.table", "equals", "QuarterlySummaries"),
    ),
)


def _sales_facts(message: A2AMessage) -> RequestFacts:
    payload = message.payload
    params = {"table": payload["table"]} if "table" in payload else {}
    return RequestFacts(
        action=str(payload.get("requestedAction", "DeliverMessage")),
        resource_id=str(payload.get("resourceId", message.recipient_did)),
        resource_params=params,
    )


def fig2_discovery_authz(seed: int = 20251002) -> Scenario:
    def setup(world: World) -> None:
        riskbot = world.add_actor(
            "riskbot",
            did=_RISK_BOT_DID,
            scope=("FinancialRiskAnalysis",),
            toolset=(ToolGrant("SecureSQLConnector", ("MarketingAnalytics", "Sales")),),
        )
        decoy = world.add_actor("decoy", did=_DECOY_BOT_DID)
        orchestrator = world.add_actor("orchestrator", did=_ORCHESTRATOR_DID)
        gateway = world.add_actor("gateway")
        hr = world.add_actor("hr-issuer", did=_HR_ISSUER_DID)
        sox = world.add_actor("sox-issuer", did=_SOX_ISSUER_DID)

        world.issue_credential(
            hr, riskbot, label="role",
            types=("EmploymentRoleCredential",),
            claims={"role": "FinancialRiskAnalystRole"}, valid_from=0,
        )
        world.issue_credential(
            hr, riskbot, label="capability",
            types=("CapabilityAttestation",),
            claims={"capability": "SalesDataAnalyticsCapability"}, valid_from=0,
        )
        for holder in (riskbot, decoy):
            world.issue_credential(
                sox, holder, label="sox",
                types=("SOXComplianceCertified",),
                claims={"framework": "SOX-404"}, valid_from=0,
            )

        world.ans_register(
            riskbot, _RISK_BOT_NAME,
            ("FinancialRiskAnalysis.CorporateReporting",),
            protocol_extensions={"acpVersion": "1.0", "maxConcurrentJobs": 4},
            attestation_labels=("sox",),
        )
        world.ans_register(
            decoy, _DECOY_BOT_NAME,
            ("FinancialRiskAnalysis.CorporateReporting",),
            attestation_labels=("sox",),
        )

        world.resources["InternalDB-SalesFigures"] = {
            "tags": {"sensitivity": "High"},
            "schema": "Sales",
        }
        world.load_policy_documents([_SALES_POLICY])
        world.trusted_issuers = frozenset({_HR_ISSUER_DID, _SOX_ISSUER_DID})

        world.establish(riskbot, ("FinancialRiskAnalysis",))
        adapter = ProtocolAdapter(
            world, "acp-data", "acp", pull_interval=1, request_mapper=_sales_facts
        )
        adapter.bind(riskbot, world.clock.now)
        world.adapters["acp-data"] = adapter

    def discover(world: World, now: int) -> dict[str, Any]:
        response, _ = world.ans_resolve(
            world.actor("orchestrator"), _DISCOVERY_QUERY, now,
            collaboration={"taskId": "task-quarterly-risk"},
        )
        agents = [a["agentDid"] for a in response.resolved_agents]
        first = response.resolved_agents[0] if response.resolved_agents else {}
        snippet_types = sorted({s["type"] for s in first.get("relevantVcSnippets", ())})
        return {
            "status": response.resolution_status,
            "agents": agents,
            "firstSnippets": snippet_types,
        }

    query_payload = {
        "requestedAction": "QUERY_TABLE",
        "resourceId": "InternalDB-SalesFigures",
        "table": "QuarterlySummaries",
        "taskId": "task-quarterly-risk",
    }

    def query(message_id: str, labels: tuple[str, ...]):
        def run(world: World, now: int) -> dict[str, Any]:
            gateway = world.actor("gateway")
            return _send(
                world, "riskbot", "acp-data", gateway.did,
                message_id=message_id, payload=query_payload, labels=labels,
            )

        return run

    script = (
        Step(1, "orchestrator", "ans-resolve", discover,
             expect={
                 "status": "success",
                 "agents": [_RISK_BOT_DID, _DECOY_BOT_DID],
                 "firstSnippets": ["SOXComplianceCertified"],
             },
             flow="discovery-authz"),
        Step(2, "riskbot", "query-sales-table",
             query("msg-fig2-0001", ("role", "capability", "sox")),
             expect=_allow("acme.data_access#allow"),
             decision="deliver", flow="discovery-authz"),
        Step(3, "riskbot", "query-without-sox",
             query("msg-fig2-0002", ("role", "capability")),
             expect=_deny(
                 "policy", "conditions-not-met",
                 failed=[["acme.data_access#allow", "agent.vcs[]", "containsType"]],
             ),
             decision="deny"),
    )
    return Scenario(name="fig2_discovery_authz", seed=seed, setup=setup, script=script)


# ── just-in-time tool passes over MCP ───────────────────────────────────

_ENGINE_DID = "did:com:acme:workflow:engine-issuer"
_TEMP_AGENT_DID = "did:ephemeral:task-xyz:agent-77"
_TOOL03_DID = "did:com:acmetools:mcp:tool:transformq:instance03"
_TOOL04_DID = "did:com:acmetools:mcp:tool:transformq:instance04"
_JOB_ID = "job-ephemeral-77a"
_INPUT_HANDLE = "blob://temp-input-xyz"
_OUTPUT_HANDLE = "blob://temp-output-xyz"

_TOOL_QUERY = AnsQuery(
    mode=QueryMode.BY_CAPABILITY,
    required_capability="VectorEmbeddings.HighDimReduction",
    desired_protocol="mcp",
    availability_requirement="online_accepting_jobs",
)


def fig3_jit_mcp(seed: int = 20251003) -> Scenario:
    def setup(world: World) -> None:
        engine = world.add_actor("engine", did=_ENGINE_DID)
        temp77 = world.add_actor(
            "temp77",
            did=_TEMP_AGENT_DID,
            scope=("VectorEmbeddings",),
            toolset=(ToolGrant("DataTransformationTool-Q", (), tool_did=_TOOL03_DID),),
        )
        tool03 = world.add_actor("tool03", did=_TOOL03_DID)
        tool04 = world.add_actor("tool04", did=_TOOL04_DID)

        world.register_tool(
            tool03, "DataTransformationTool-Q",
            {"executeTransform": {"status": "Success", "outputDataReference": _OUTPUT_HANDLE}},
        )
        world.register_tool(
            tool04, "DataTransformationTool-Q",
            {"executeTransform": {"status": "Success", "outputDataReference": "blob://other"}},
        )
        world.ans_register(
            tool03, "mcp://DataTransformationTool-Q.VectorEmbeddings.AcmeTools.v1.0.0.internal",
            ("VectorEmbeddings.HighDimReduction",),
        )
        world.ans_register(
            tool04, "mcp://DataTransformationTool-Q.VectorEmbeddings.AcmeTools.v1.1.0.internal",
            ("VectorEmbeddings.HighDimReduction",),
            live=False,
        )

        world.trusted_issuers = frozenset({_ENGINE_DID})
        world.establish(temp77, ("VectorEmbeddings",))
        adapter = ProtocolAdapter(world, "mcp-tools", "mcp", pull_interval=1)
        adapter.bind(temp77, world.clock.now)
        world.adapters["mcp-tools"] = adapter

    def discover(world: World, now: int) -> dict[str, Any]:
        response, _ = world.ans_resolve(
            world.actor("engine"), _TOOL_QUERY, now, collaboration={"jobId": _JOB_ID}
        )
        return {
            "status": response.resolution_status,
            "agents": [a["agentDid"] for a in response.resolved_agents],
        }

    def issue_pass(world: World, now: int) -> dict[str, Any]:
        engine, temp77 = world.actor("engine"), world.actor("temp77")
        credential = world.issue_tool_pass(
            engine, temp77, label="jit",
            tool_did=_TOOL03_DID, allowed_actions=("executeTransform",),
            job_id=_JOB_ID, input_handle=_INPUT_HANDLE, output_handle=_OUTPUT_HANDLE,
            valid_from=now,
        )
        world.audit.append(
            agent_did=engine.did, action="IssueJitCredential", now=now,
            initiating_system="WorkflowEngine",
            target_resource_did=temp77.did,
            presented_vc_ids=(credential.credential_id,),
            collaboration_context={"jobId": _JOB_ID},
            outcome={
                "status": "Success",
                "jobId": _JOB_ID,
                "validFrom": credential.valid_from,
                "validUntil": credential.valid_until,
            },
        )
        return {
            "types": list(credential.types),
            "validFrom": credential.valid_from,
            "validUntil": credential.valid_until,
        }

    def invoke(tool_did: str = _TOOL03_DID, action: str = "executeTransform"):
        def run(world: World, now: int) -> dict[str, Any]:
            temp77 = world.actor("temp77")
            call = build_mcp_call(
                temp77.did, temp77.credential("jit"),
                tool_did=tool_did, job_id=_JOB_ID, input_ref=_INPUT_HANDLE,
                action=action, parameters={"algorithm": "PCA", "dimensions": "128"},
            )
            return world.adapters["mcp-tools"].invoke(call, now).observed()

        return run

    transform_ok = {
        **_DELIVERED,
        "policyId": JIT_BINDING_RULE_ID,
        "response": {"status": "Success", "outputDataReference": _OUTPUT_HANDLE},
    }

    steps: list[Step] = [
        Step(1, "engine", "ans-resolve", discover,
             expect={"status": "success", "agents": [_TOOL03_DID]}, flow="jit"),
        Step(2, "engine", "issue-jit-pass", issue_pass,
             expect={
                 "types": ["VerifiableCredential", "MCPToolAccessPass"],
                 "validFrom": 2,
                 "validUntil": 16,
             },
             flow="jit"),
    ]
    for tick in range(2, 17):  # the full inclusive validity window
        steps.append(
            Step(tick, "temp77", "invoke-transform", invoke(),
                 expect=transform_ok, decision="deliver",
                 flow="jit" if tick == 2 else None)
        )
        if tick == 9:
            steps.append(
                Step(9, "temp77", "invoke-wrong-tool", invoke(tool_did=_TOOL04_DID),
                     expect=_deny("policy", "binding-mismatch"), decision="deny")
            )
            steps.append(
                Step(9, "temp77", "invoke-wrong-action", invoke(action="deleteData"),
                     expect=_deny("policy", "action-not-allowed"), decision="deny")
            )
    steps.append(
        Step(17, "temp77", "invoke-after-expiry", invoke(),
             expect=_deny("presentation", "expired"), decision="deny")
    )
    return Scenario(name="fig3_jit_mcp", seed=seed, setup=setup, script=tuple(steps))


# ── signed cross-organization alerts over A2A ───────────────────────────

_ALERTER_DID = "did:com:sysx:a2a:alerter:main"
_SOC_DID = "did:com:platy:a2a:socdash:primary"
_SEC_AUTHORITY_DID = "did:com:sysx:security-authority"
_SOC_NAME = "a2a://SOCDashboardAgent.SecurityAlertIngestion.PlatformY.v2.critical"

_ALERT_POLICY = PolicyDocument(
    policy_id="platy.alert_ingest#allow",
    target=(
        Predicate("resource.id", "equals", "SOCDashboard-AlertIngest"),
        Predicate("action", "equals", "IngestAlert"),
    ),
    conditions=(
        Predicate("agent.vcs[]", "containsType", "CriticalAlertSourceCredential"),
        Predicate(
            "context.alertType",
            "memberOf",
            PathRef("agent.vcs[].claims.authorizedAlertTypes"),
        ),
        Predicate(
            "context.sourceSystem",
            "memberOf",
            PathRef("agent.vcs[].claims.authorizedSourceSystems"),
        ),
    ),
)


def _alert_facts(message: A2AMessage) -> RequestFacts:
    payload = message.payload
    return RequestFacts(
        action="IngestAlert",
        resource_id="SOCDashboard-AlertIngest",
        context={
            "alertType": payload.get("alertType"),
            "sourceSystem": payload.get("sourceSystem"),
        },
    )


def fig4_a2a_alert(seed: int = 20251004) -> Scenario:
    def setup(world: World) -> None:
        alerter = world.add_actor("alerter", did=_ALERTER_DID, scope=("SecurityAlerting",))
        socdash = world.add_actor("socdash", did=_SOC_DID)
        authority = world.add_actor("sec-authority", did=_SEC_AUTHORITY_DID)

        world.issue_credential(
            authority, alerter, label="alert-source",
            types=("CriticalAlertSourceCredential",),
            claims={
                "authorizedAlertTypes": ["SECURITY_CRITICAL", "SYSTEM_DOWN"],
                "authorizedSourceSystems": ["SystemX_Firewall_Cluster"],
            },
            valid_from=0,
        )
        world.ans_register(socdash, _SOC_NAME, ("SecurityAlertIngestion",))
        world.resources["SOCDashboard-AlertIngest"] = {
            "tags": {"channel": "security-operations"}
        }
        world.load_policy_documents([_ALERT_POLICY])
        world.trusted_issuers = frozenset({_SEC_AUTHORITY_DID})

        world.establish(alerter, ("SecurityAlerting",))
        adapter = ProtocolAdapter(
            world, "a2a-alerts", "a2a",
            pull_interval=1, request_mapper=_alert_facts, require_presentation=True,
        )
        adapter.bind(alerter, world.clock.now)
        world.adapters["a2a-alerts"] = adapter

    def discover(world: World, now: int) -> dict[str, Any]:
        query = AnsQuery(
            mode=QueryMode.BY_NAME_AND_CAPABILITY,
            required_capability="SecurityAlertIngestion",
            ans_name_pattern=_SOC_NAME,
        )
        response, _ = world.ans_resolve(world.actor("alerter"), query, now)
        return {
            "status": response.resolution_status,
            "agents": [a["agentDid"] for a in response.resolved_agents],
        }

    def alert_payload(alert_type: str) -> dict[str, Any]:
        return {
            "alertId": "alert-4471",
            "alertType": alert_type,
            "sourceSystem": "SystemX_Firewall_Cluster",
            "severity": 5,
            "details": "privileged login burst on edge cluster",
        }

    def alert(message_id, alert_type="SECURITY_CRITICAL", labels=("alert-source",), corrupt=False):
        def run(world: World, now: int) -> dict[str, Any]:
            return _send(
                world, "alerter", "a2a-alerts", _SOC_DID,
                message_id=message_id, payload=alert_payload(alert_type),
                labels=labels, corrupt=corrupt,
            )

        return run

    script = (
        Step(1, "alerter", "ans-resolve", discover,
             expect={"status": "success", "agents": [_SOC_DID]}, flow="alert"),
        Step(2, "alerter", "send-alert", alert("msg-alert-9876"),
             expect=_allow("platy.alert_ingest#allow"),
             decision="deliver", flow="alert"),
        Step(3, "alerter", "send-alert-bad-signature",
             alert("msg-alert-9877", corrupt=True),
             expect=_deny("signature", "bad-message-signature"), decision="deny"),
        Step(4, "alerter", "send-alert-no-presentation",
             alert("msg-alert-9878", labels=()),
             expect=_deny("presentation", "missing-presentation"), decision="deny"),
        Step(5, "alerter", "send-alert-unauthorized-type",
             alert("msg-alert-9879", alert_type="MAINTENANCE_WINDOW"),
             expect=_deny(
                 "policy", "conditions-not-met",
                 failed=[["platy.alert_ingest#allow", "context.alertType", "memberOf"]],
             ),
             decision="deny"),
    )
    return Scenario(name="fig4_a2a_alert", seed=seed, setup=setup, script=script)


# ── incident lockout with bounded revocation lag ────────────────────────

_PING_POLICY = PolicyDocument(
    policy_id="ops.ping#allow",
    target=(
        Predicate("resource.id", "equals", "PingService"),
        Predicate("action", "equals", "Ping"),
    ),
    conditions=(
        Predicate("context.sessionStatus", "memberOf", ("active", "ReducedTrust")),
    ),
)

_OPS_ADAPTERS = ("ops-a2a", "ops-acp", "ops-mcp")


def incident_lockout(
    seed: int = 20260101,
    pull_interval: int = 3,
    compromise_tick: Optional[int] = None,
) -> Scenario:
    if pull_interval < 1:
        raise ScenarioError("pull_interval must be at least 1")
    rng = random.Random(seed)
    t_compromise = (
        compromise_tick
        if compromise_tick is not None
        else rng.randint(pull_interval + 1, 3 * pull_interval + 1)
    )
    if t_compromise < 1:
        raise ScenarioError("compromise tick must be at least 1")
    # First pull strictly after the logout; the adapter converges there.
    t_converged = (t_compromise // pull_interval + 1) * pull_interval
    horizon = t_converged + 2

    def setup(world: World) -> None:
        alpha = world.add_actor("alpha", scope=("Operations",))
        world.add_actor("gateway")
        world.resources["PingService"] = {"tags": {}}
        world.load_policy_documents([_PING_POLICY])
        world.establish(alpha, ("Operations",))
        for adapter_id, protocol in zip(_OPS_ADAPTERS, ("a2a", "acp", "mcp")):
            adapter = ProtocolAdapter(
                world, adapter_id, protocol, pull_interval=pull_interval
            )
            adapter.bind(alpha, world.clock.now)
            world.adapters[adapter_id] = adapter

    def ping(adapter_id: str, message_id: str, nonce: int):
        payload = {
            "requestedAction": "Ping",
            "resourceId": "PingService",
            "nonce": nonce,
        }

        def run(world: World, now: int) -> dict[str, Any]:
            gateway = world.actor("gateway")
            return _send(
                world, "alpha", adapter_id, gateway.did,
                message_id=message_id, payload=payload,
            )

        return run

    def lockout(world: World, now: int) -> dict[str, Any]:
        alpha = world.actor("alpha")
        affected = world.sessions.global_logout(alpha.did, SECURITY_LOCKOUT_REASON, now)
        world.note_lockout(alpha.did, now)
        world.audit.append(
            agent_did=alpha.did, action="GlobalLogout", now=now,
            initiating_system="IncidentResponse",
            outcome={"status": "Success", "reason": SECURITY_LOCKOUT_REASON},
        )
        return {"status": affected[0].status.value}

    def convergence(world: World, now: int) -> dict[str, Any]:
        alpha = world.actor("alpha")
        seen = [
            world.adapters[a].terminated_seen_at(alpha.did) for a in _OPS_ADAPTERS
        ]
        stray = sum(
            1
            for adapter_id in _OPS_ADAPTERS
            for tick, _ in world.adapters[adapter_id].deliveries
            if tick >= t_converged
        )
        lag = max((s - t_compromise) for s in seen if s is not None) if any(
            s is not None for s in seen
        ) else None
        return {
            "converged": all(s is not None for s in seen),
            "revocationTimeTicks": lag,
            "strayDeliveries": stray,
        }

    steps: list[Step] = []
    for tick in range(1, horizon + 1):
        if tick == t_compromise:
            steps.append(
                Step(tick, "system", "global-logout", lockout,
                     expect={"status": "TERMINATED_IMMEDIATE_SECURITY_LOCKOUT"})
            )
        for adapter_id in _OPS_ADAPTERS:
            expected = (
                _allow("ops.ping#allow")
                if tick < t_converged
                else _deny("session", "terminated")
            )
            steps.append(
                Step(tick, "alpha", f"ping-{adapter_id}",
                     ping(adapter_id, f"msg-ping-{tick:02d}-{adapter_id}",
                          rng.randrange(1_000_000)),
                     expect=expected,
                     decision="deliver" if tick < t_converged else "deny",
                     flow="ops" if tick == 1 and adapter_id == _OPS_ADAPTERS[0] else None)
            )
    steps.append(
        Step(horizon, "system", "check-convergence", convergence,
             expect={
                 "converged": True,
                 "revocationTimeTicks": t_converged - t_compromise,
                 "strayDeliveries": 0,
             })
    )
    return Scenario(
        name="incident_lockout",
        seed=seed,
        setup=setup,
        script=tuple(steps),
        parameters={"pullInterval": pull_interval, "compromiseTick": t_compromise},
    )


# ── risk-adaptive payment limits under degraded trust ───────────────────

_ORDERBOT_DID = "did:com:retail:a2a:orderbot:v1"
_FULFILL_DID = "did:com:supplierx:a2a:fulfill:v2"
_PAY_AUTHORITY_DID = "did:com:retail:payments-authority"
_AUDIT_TOOL_DID = "did:com:retail:mcp:tool:auditdb:prod"

_PAYMENT_POLICY = PolicyDocument(
    policy_id="retail.payments#allow",
    target=(
        Predicate("resource.id", "equals", "PaymentGateway-SupplierX"),
        Predicate("action", "equals", "AUTHORIZE_PAYMENT"),
    ),
    conditions=(Predicate("agent.vcs[]", "containsType", "PaymentProcessorRole"),),
)

_RISK_OBLIGATIONS = ("require_multi_factor_agent_auth", "limit_transaction_value")


def _payment_facts(message: A2AMessage) -> RequestFacts:
    payload = message.payload
    context: dict[str, Any] = {
        "amount": payload.get("totalAmount"),
        "currency": payload.get("currency"),
    }
    if "controllerApproval" in payload:
        context["controllerApproval"] = payload["controllerApproval"]
    return RequestFacts(
        action="AUTHORIZE_PAYMENT",
        resource_id="PaymentGateway-SupplierX",
        context=context,
    )


def risk_adaptive_payment(seed: int = 20251006) -> Scenario:
    def setup(world: World) -> None:
        orderbot = world.add_actor(
            "orderbot",
            did=_ORDERBOT_DID,
            scope=("OrderManagement",),
            toolset=(ToolGrant("OrderDBConnector", ("Orders",)),),
            extra_keys=("key-transact",),
        )
        world.add_actor("fulfill", did=_FULFILL_DID)
        authority = world.add_actor("pay-authority", did=_PAY_AUTHORITY_DID)
        audit_tool = world.add_actor("audit-tool", did=_AUDIT_TOOL_DID)

        world.issue_credential(
            authority, orderbot, label="processor",
            types=("PaymentProcessorRole",),
            claims={"role": "PaymentProcessor"}, valid_from=0,
        )
        world.register_tool(
            audit_tool, "AuditDBConnector",
            {"queryLedger": {"status": "Success", "rows": 0}},
        )
        world.resources["PaymentGateway-SupplierX"] = {"tags": {"kind": "payments"}}
        world.load_policy_documents([_PAYMENT_POLICY])
        world.trusted_issuers = frozenset({_PAY_AUTHORITY_DID})

        world.establish(orderbot, ("OrderManagement",))
        payments = ProtocolAdapter(
            world, "a2a-payments", "a2a",
            pull_interval=1, request_mapper=_payment_facts, require_presentation=True,
        )
        payments.bind(orderbot, world.clock.now)
        world.adapters["a2a-payments"] = payments
        side = ProtocolAdapter(world, "mcp-side", "mcp", pull_interval=1)
        side.bind(orderbot, world.clock.now)
        world.adapters["mcp-side"] = side

    def order_payload(amount: int, approval: Optional[bool] = None) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "orderId": "PO-2025-10-778",
            "items": [
                {"sku": "XYZ123", "quantity": 100},
                {"sku": "ABC789", "quantity": 50},
            ],
            "shippingAddress": "dock 4, supplier intake",
            "totalAmount": amount,
            "currency": "USD",
        }
        if approval is not None:
            payload["controllerApproval"] = approval
        return payload

    def pay(message_id: str, amount: int, approval: Optional[bool] = None):
        def run(world: World, now: int) -> dict[str, Any]:
            return _send(
                world, "orderbot", "a2a-payments", _FULFILL_DID,
                message_id=message_id, payload=order_payload(amount, approval),
                labels=("processor",), payload_key="key-transact",
            )

        return run

    def rogue_lookup(world: World, now: int) -> dict[str, Any]:
        query = AnsQuery(
            mode=QueryMode.BY_CAPABILITY,
            required_capability="FinancialData.InternalAudit",
        )
        response, _ = world.ans_resolve(world.actor("orderbot"), query, now)
        return {
            "status": response.resolution_status,
            "agents": len(response.resolved_agents),
        }

    def rogue_invoke(world: World, now: int) -> dict[str, Any]:
        orderbot = world.actor("orderbot")
        call = McpCall(
            agent_did=orderbot.did,
            credential_wire="",
            tool_did=_AUDIT_TOOL_DID,
            action="queryLedger",
            job_id="job-rogue-1",
            input_ref="blob://none",
        )
        return world.adapters["mcp-side"].invoke(call, now).observed()

    def monitor_sweep(world: World, now: int) -> dict[str, Any]:
        orderbot = world.actor("orderbot")
        anomalies = baseline_monitor(
            world.audit.entries(), orderbot.document,
            agent_did=orderbot.did, window=(1, now),
            trusted_issuers={_PAY_AUTHORITY_DID},
        )
        contexts = apply_anomalies(world.sessions, anomalies, now)
        world.audit.append(
            agent_did=orderbot.did, action="BehavioralAlert", now=now,
            initiating_system="BaselineMonitor",
            outcome={
                "status": "Anomalous",
                "kinds": [a.kind for a in anomalies],
                "trustScore": contexts[0].trust_score if contexts else None,
            },
        )
        return {
            "kinds": [a.kind for a in anomalies],
            "trustScore": contexts[0].trust_score,
            "sessionStatus": contexts[0].status.value,
        }

    script = (
        Step(1, "orderbot", "authorize-payment", pay("msg-pay-0001", 1_250_075),
             expect=_allow("retail.payments#allow"),
             decision="deliver", flow="payment"),
        Step(2, "orderbot", "rogue-ans-lookup", rogue_lookup,
             expect={"status": "not-found", "agents": 0}),
        Step(2, "orderbot", "rogue-tool-call", rogue_invoke,
             expect=_deny("signature", "bad-credential-encoding"), decision="deny"),
        Step(3, "system", "monitor-sweep", monitor_sweep,
             expect={
                 "kinds": ["scope-deviation", "toolset-violation"],
                 "trustScore": 55,
                 "sessionStatus": "ReducedTrust",
             }),
        Step(4, "orderbot", "authorize-payment-reduced-trust",
             pay("msg-pay-0002", 1_250_075),
             expect=_deny(
                 "policy", "risk-limit",
                 failed=[["risk.reduced_trust#limit", "context.amount", "atMost"]],
             ),
             decision="deny"),
        Step(5, "orderbot", "authorize-payment-with-approval",
             pay("msg-pay-0003", 1_250_075, approval=True),
             expect=_allow("retail.payments#allow", _RISK_OBLIGATIONS),
             decision="deliver"),
        Step(6, "orderbot", "authorize-small-payment", pay("msg-pay-0004", 40_000),
             expect=_allow("retail.payments#allow", _RISK_OBLIGATIONS),
             decision="deliver"),
    )
    return Scenario(name="risk_adaptive_payment", seed=seed, setup=setup, script=script)


# ── peer reputation feedback ────────────────────────────────────────────

_EXECUTOR_NAME = "a2a://TaskExecutor.GeneralPurpose.CommunityPool.v1.standard"
_TASK_ID = "task-community-4411"

_TASK_POLICY = PolicyDocument(
    policy_id="community.tasks#allow",
    target=(
        Predicate("resource.id", "equals", "TaskPool-Community"),
        Predicate("action", "equals", "ExecuteTask"),
    ),
    conditions=(Predicate("context.sessionStatus", "equals", "active"),),
)


def reputation_feedback(seed: int = 20251007) -> Scenario:
    # Self-certifying DIDs are functions of their seeds, so the executor's
    # identifier is known before any world exists.
    executor_did = generate_identity(b"harness:executor")[2].did.render()

    def setup(world: World) -> None:
        executor = world.add_actor("executor", scope=("GeneralPurpose",))
        requester = world.add_actor("requester")
        world.ans_register(executor, _EXECUTOR_NAME, ("GeneralPurpose.TaskExecution",))
        world.resources["TaskPool-Community"] = {"tags": {"pool": "community"}}
        world.load_policy_documents([_TASK_POLICY])

        world.establish(requester, ("TaskRequesting",))
        world.establish(executor, ("GeneralPurpose",))
        adapter = ProtocolAdapter(world, "a2a-tasks", "a2a", pull_interval=1)
        adapter.bind(requester, world.clock.now)
        world.adapters["a2a-tasks"] = adapter

    def discover(world: World, now: int) -> dict[str, Any]:
        query = AnsQuery(
            mode=QueryMode.BY_CAPABILITY,
            required_capability="GeneralPurpose.TaskExecution",
        )
        response, _ = world.ans_resolve(world.actor("requester"), query, now)
        return {
            "status": response.resolution_status,
            "agents": [a["agentDid"] for a in response.resolved_agents],
        }

    def request_task(world: World, now: int) -> dict[str, Any]:
        executor = world.actor("executor")
        return _send(
            world, "requester", "a2a-tasks", executor.did,
            message_id="msg-task-0001",
            payload={
                "requestedAction": "ExecuteTask",
                "resourceId": "TaskPool-Community",
                "taskId": _TASK_ID,
                "description": "summarize the intake queue",
            },
        )

    def complete_task(world: World, now: int) -> dict[str, Any]:
        executor = world.actor("executor")
        world.audit.append(
            agent_did=executor.did, action="TaskCompleted", now=now,
            initiating_system="TaskExecutor",
            collaboration_context={"taskId": _TASK_ID},
            outcome={"status": "Success"},
        )
        return {"status": "Success"}

    def give_feedback(world: World, now: int) -> dict[str, Any]:
        requester, executor = world.actor("requester"), world.actor("executor")
        credential = world.issue_reputation(
            requester, executor, label="rep",
            rating=5, task_id=_TASK_ID,
            capability_context=_EXECUTOR_NAME,
            comment="fast and accurate",
            valid_from=now,
        )
        verifies = verify_credential(
            credential, world.resolver, world.status_store, now
        ).valid
        world.audit.append(
            agent_did=requester.did, action="ReputationIssued", now=now,
            initiating_system="TaskRequester",
            target_resource_did=executor.did,
            presented_vc_ids=(credential.credential_id,),
            collaboration_context={"taskId": _TASK_ID},
            outcome={"status": "Success", "rating": 5},
        )
        return {
            "rating": credential.claims["rating"],
            "taskRef": credential.claims["taskId"],
            "types": list(credential.types),
            "verifies": verifies,
        }

    script = (
        Step(1, "requester", "ans-resolve", discover,
             expect={"status": "success", "agents": [executor_did]}, flow="task"),
        Step(2, "requester", "request-task", request_task,
             expect=_allow("community.tasks#allow"),
             decision="deliver", flow="task"),
        Step(3, "executor", "complete-task", complete_task,
             expect={"status": "Success"}),
        Step(4, "requester", "issue-reputation", give_feedback,
             expect={
                 "rating": 5,
                 "taskRef": _TASK_ID,
                 "types": [
                     "VerifiableCredential",
                     "ReputationCredential",
                     "PerformanceReview",
                 ],
                 "verifies": True,
             }),
    )
    return Scenario(name="reputation_feedback", seed=seed, setup=setup, script=script)


# ── registry and scenario files ─────────────────────────────────────────

BUILTIN_SCENARIOS: dict[str, Callable[..., Scenario]] = {
    "fig2_discovery_authz": fig2_discovery_authz,
    "fig3_jit_mcp": fig3_jit_mcp,
    "fig4_a2a_alert": fig4_a2a_alert,
    "incident_lockout": incident_lockout,
    "risk_adaptive_payment": risk_adaptive_payment,
    "reputation_feedback": reputation_feedback,
}


def builtin_scenario(name: str, parameters: Optional[Mapping[str, Any]] = None) -> Scenario:
    try:
        builder = BUILTIN_SCENARIOS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_SCENARIOS))
        raise ScenarioError(f"unknown scenario {name!r}; built-ins: {known}") from None
    try:
        return builder(**dict(parameters or {}))
    except TypeError as exc:
        raise ScenarioError(f"bad parameters for {name!r}: {exc}") from None


def load_scenario_file(path: Path | str) -> Scenario:
    """Load a scenario document: {"scenario": <name>, "parameters": {...}}."""
    data = Path(path).read_bytes()
    value = canonical_loads(data)
    if not isinstance(value, dict) or "scenario" not in value:
        raise ScenarioError(f"{path}: expected a document with a 'scenario' field")
    parameters = value.get("parameters", {})
    if not isinstance(parameters, dict):
        raise ScenarioError(f"{path}: 'parameters' must be an object")
    return builtin_scenario(value["scenario"], parameters)
