#!/usr/bin/env python3
"""Sweep revocation propagation lag across session pull intervals.

For each pull interval k the incident scenario is replayed over randomized
seeds and compromise ticks.  Sessions re-check revocation only when they
pull, so the observed lag must stay within (0, k] ticks.

Examples:
    python3 scripts/revocation_sweep.py
    python3 scripts/revocation_sweep.py --intervals 1 2 4 8 --runs 200
"""

from __future__ import annotations

import argparse
import random
import statistics
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from agentiam.harness import builtin_scenario, execute


def sweep_interval(interval: int, runs: int, rng: random.Random) -> list[int]:
    lags = []
    for _ in range(runs):
        scenario = builtin_scenario(
            "incident_lockout",
            {
                "seed": rng.randrange(1, 1_000_000),
                "pull_interval": interval,
                "compromise_tick": rng.randrange(2, 30),
            },
        )
        report, _ = execute(scenario)
        if not report.passed:
            raise AssertionError(f"scenario failed for interval={interval}: {report.to_text()}")
        lags.append(report.metrics["revocationTimeTicks"])
    return lags


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--intervals",
        type=int,
        nargs="+",
        default=[1, 2, 3, 5, 8],
        help="session pull intervals to sweep (ticks)",
    )
    parser.add_argument("--runs", type=int, default=100, help="runs per interval")
    parser.add_argument("--seed", type=int, default=0, help="sweep RNG seed")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    print(f"{'interval':>8}  {'runs':>5}  {'min':>4}  {'mean':>6}  {'max':>4}  bound")
    violations = 0
    for interval in args.intervals:
        lags = sweep_interval(interval, args.runs, rng)
        worst = max(lags)
        within = worst <= interval and min(lags) >= 1
        if not within:
            violations += 1
        print(
            f"{interval:>8}  {len(lags):>5}  {min(lags):>4}  "
            f"{statistics.mean(lags):>6.2f}  {worst:>4}  "
            f"{'ok' if within else 'VIOLATED'}"
        )
    if violations:
        print(f"{violations} interval(s) exceeded the pull-interval bound", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
