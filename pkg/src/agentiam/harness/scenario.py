"""Scenario scripting and execution.

A scenario is a setup function plus a script of steps, each pinned to a
tick with an expected observation.  Execution advances the clock tick by
tick, lets every adapter pull session state at the start of each tick,
then runs the steps due.  The report carries per-step pass/fail, the
three summary metrics, and the head of the audit chain the run produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

from ..canonical import to_hex
from ..crypto import KeyPair
from ..errors import ScenarioError
from .world import World

__all__ = [
    "Scenario",
    "ScenarioReport",
    "Step",
    "StepResult",
    "execute",
    "run_scenario",
]


@dataclass(frozen=True)
class Step:
    """One scripted action with its expected observation.

    ``decision`` marks enforcement steps: "deliver" or "deny", counted
    into enforcement accuracy.  ``flow`` groups steps into a task whose
    time from first step to first decision is the authorization latency.
    """

    tick: int
    actor: str
    action: str
    run: Callable[[World, int], Any]
    expect: Any = None
    decision: Optional[str] = None
    flow: Optional[str] = None


@dataclass(frozen=True)
class StepResult:
    tick: int
    actor: str
    action: str
    flow: Optional[str]
    expected: Any
    observed: Any
    passed: bool

    def to_value(self) -> dict[str, Any]:
        return {
            "tick": self.tick,
            "actor": self.actor,
            "action": self.action,
            "flow": self.flow,
            "expected": self.expected,
            "observed": self.observed,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    setup: Callable[[World], None]
    script: tuple[Step, ...]
    parameters: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioReport:
    scenario: str
    seed: int
    parameters: Mapping[str, Any]
    steps: tuple[StepResult, ...]
    metrics: Mapping[str, Any]
    audit_head: str
    audit_entries: int
    passed: bool

    def to_value(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "parameters": dict(self.parameters),
            "steps": [step.to_value() for step in self.steps],
            "metrics": dict(self.metrics),
            "auditLog": {"headHash": self.audit_head, "entryCount": self.audit_entries},
            "passed": self.passed,
        }

    def to_text(self) -> str:
        lines = [f"scenario {self.scenario} (seed {self.seed})"]
        for step in self.steps:
            mark = "ok  " if step.passed else "FAIL"
            lines.append(f"  {mark} tick {step.tick:3d} {step.actor:<12} {step.action}")
            if not step.passed:
                lines.append(f"       expected {step.expected!r}")
                lines.append(f"       observed {step.observed!r}")
        accuracy = self.metrics["enforcementAccuracy"]
        lines.append(
            "metrics"
            f" authorizationLatencyTicks={self.metrics['authorizationLatencyTicks']}"
            f" revocationTimeTicks={self.metrics['revocationTimeTicks']}"
            f" enforcementAccuracy={accuracy['percent']}%"
            f" ({accuracy['allowedCorrectly'] + accuracy['deniedCorrectly']}"
            f"/{accuracy['expectedAllows'] + accuracy['expectedDenies']})"
        )
        lines.append(f"audit entries={self.audit_entries} head={self.audit_head[:16]}")
        lines.append(f"result {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _validate(scenario: Scenario, world: World) -> None:
    previous = 0
    for index, step in enumerate(scenario.script):
        if step.tick < 1:
            raise ScenarioError(f"step {index}: ticks start at 1, got {step.tick}")
        if step.tick < previous:
            raise ScenarioError(f"step {index}: tick {step.tick} regresses")
        previous = step.tick
        if step.actor != "system" and step.actor not in world.actors:
            raise ScenarioError(f"step {index}: unknown actor {step.actor!r}")
        if step.decision not in (None, "deliver", "deny"):
            raise ScenarioError(f"step {index}: bad decision marker {step.decision!r}")


def _accuracy(steps: tuple[StepResult, ...], script: tuple[Step, ...]) -> dict[str, int]:
    expected_allows = expected_denies = allowed = denied = 0
    for step, result in zip(script, steps):
        if step.decision is None:
            continue
        observed = (
            result.observed.get("decision")
            if isinstance(result.observed, Mapping)
            else None
        )
        if step.decision == "deliver":
            expected_allows += 1
            allowed += observed == "deliver"
        else:
            expected_denies += 1
            denied += observed == "deny"
    total = expected_allows + expected_denies
    matched = allowed + denied
    return {
        "expectedAllows": expected_allows,
        "allowedCorrectly": allowed,
        "expectedDenies": expected_denies,
        "deniedCorrectly": denied,
        "percent": (matched * 100) // total if total else 100,
    }


def _latency(script: tuple[Step, ...]) -> int:
    starts: dict[str, int] = {}
    decisions: dict[str, int] = {}
    for step in script:
        if step.flow is None:
            continue
        starts.setdefault(step.flow, step.tick)
        if step.decision is not None:
            decisions.setdefault(step.flow, step.tick)
    if not decisions:
        return 0
    return max(decisions[flow] - starts[flow] for flow in decisions)


def _revocation_time(world: World) -> int:
    worst = 0
    for did, logout_tick in world.lockouts:
        for adapter in world.adapters.values():
            seen = adapter.terminated_seen_at(did)
            if seen is not None and seen >= logout_tick:
                worst = max(worst, seen - logout_tick)
    return worst


def execute(
    scenario: Scenario,
    *,
    audit_path: Optional[Path] = None,
    audit_key: Optional[KeyPair] = None,
) -> tuple[ScenarioReport, World]:
    """Run a scenario and return the report plus the finished world."""
    world = World(scenario.seed, audit_path=audit_path, audit_key=audit_key)
    scenario.setup(world)
    _validate(scenario, world)

    results: list[StepResult] = []
    for step in scenario.script:
        while world.clock.now < step.tick:
            now = world.clock.advance()
            for adapter_id in sorted(world.adapters):
                world.adapters[adapter_id].maybe_pull(now)
        observed = step.run(world, step.tick)
        results.append(
            StepResult(
                tick=step.tick,
                actor=step.actor,
                action=step.action,
                flow=step.flow,
                expected=step.expect,
                observed=observed,
                passed=observed == step.expect,
            )
        )

    steps = tuple(results)
    metrics = {
        "authorizationLatencyTicks": _latency(scenario.script),
        "revocationTimeTicks": _revocation_time(world),
        "enforcementAccuracy": _accuracy(steps, scenario.script),
    }
    report = ScenarioReport(
        scenario=scenario.name,
        seed=scenario.seed,
        parameters=dict(scenario.parameters),
        steps=steps,
        metrics=metrics,
        audit_head=to_hex(world.audit.head_hash()),
        audit_entries=len(world.audit),
        passed=all(step.passed for step in steps),
    )
    return report, world


def run_scenario(
    scenario: Scenario,
    *,
    audit_path: Optional[Path] = None,
    audit_key: Optional[KeyPair] = None,
) -> ScenarioReport:
    return execute(scenario, audit_path=audit_path, audit_key=audit_key)[0]
