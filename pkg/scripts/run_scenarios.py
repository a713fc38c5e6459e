#!/usr/bin/env python3
"""Run the built-in scenarios and print their reports plus a KPI table.

Examples:
    python3 scripts/run_scenarios.py
    python3 scripts/run_scenarios.py fig3_jit_mcp incident_lockout
    python3 scripts/run_scenarios.py --audit-dir /tmp/logs --canonical
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from agentiam.canonical import canonical_bytes
from agentiam.harness import builtin_scenario, execute
from agentiam.harness.builtins import BUILTIN_SCENARIOS


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "names",
        nargs="*",
        default=list(BUILTIN_SCENARIOS),
        help="scenario names (default: all built-ins)",
    )
    parser.add_argument(
        "--audit-dir",
        type=Path,
        default=None,
        help="also write each scenario's audit log into this directory",
    )
    parser.add_argument(
        "--canonical",
        action="store_true",
        help="emit canonical report documents instead of text",
    )
    args = parser.parse_args()

    unknown = [name for name in args.names if name not in BUILTIN_SCENARIOS]
    if unknown:
        parser.error(f"unknown scenario(s): {', '.join(unknown)}")
    if args.audit_dir is not None:
        args.audit_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    all_passed = True
    for name in args.names:
        audit_path = args.audit_dir / f"{name}.log" if args.audit_dir else None
        report, _ = execute(builtin_scenario(name), audit_path=audit_path)
        if args.canonical:
            print(canonical_bytes(report.to_value()).decode())
        else:
            print(report.to_text())
            print()
        metrics = report.metrics
        rows.append(
            (
                name,
                metrics["authorizationLatencyTicks"],
                metrics["revocationTimeTicks"],
                metrics["enforcementAccuracy"]["percent"],
                "pass" if report.passed else "FAIL",
            )
        )
        all_passed = all_passed and report.passed

    if not args.canonical:
        width = max(len(row[0]) for row in rows)
        print(f"{'scenario':<{width}}  latency  revocation  accuracy  result")
        for name, latency, revocation, accuracy, result in rows:
            print(f"{name:<{width}}  {latency:>7}  {revocation:>10}  {accuracy:>7}%  {result}")
    return 0 if all_passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
