"""Deterministic multi-agent simulation harness.

A `World` wires every framework service onto one `SimClock`; protocol
adapters wrap each communication surface with the enforcement pipeline,
and scenarios script agent interactions tick by tick.  Runs are fully
reproducible: same seed, same bytes.
"""

from .adapters import EnforcedResult, ProtocolAdapter, RequestFacts, mcp_invoke
from .builtins import BUILTIN_SCENARIOS, builtin_scenario, load_scenario_file
from .clock import SimClock
from .messages import A2AMessage, McpCall, build_a2a_message, build_mcp_call
from .monitor import ANOMALY_TRUST_DELTAS, Anomaly, apply_anomalies, baseline_monitor
from .scenario import Scenario, ScenarioReport, Step, StepResult, execute, run_scenario
from .world import Actor, ToolStub, World

__all__ = [
    "A2AMessage",
    "ANOMALY_TRUST_DELTAS",
    "Actor",
    "Anomaly",
    "BUILTIN_SCENARIOS",
    "EnforcedResult",
    "McpCall",
    "ProtocolAdapter",
    "RequestFacts",
    "Scenario",
    "ScenarioReport",
    "SimClock",
    "Step",
    "StepResult",
    "ToolStub",
    "World",
    "apply_anomalies",
    "baseline_monitor",
    "build_a2a_message",
    "build_mcp_call",
    "builtin_scenario",
    "execute",
    "load_scenario_file",
    "mcp_invoke",
    "run_scenario",
]
