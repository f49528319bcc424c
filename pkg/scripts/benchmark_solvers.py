"""Time the horizon and whole-body solves against their real-time budgets.

Usage::

    python -m scripts.benchmark_solvers --scenario walk_in_place --duration 2
    python -m scripts.benchmark_solvers --scenario balance_5kg_model2 --export timings.json

Runs the scenario closed loop (without writing a trace) and prints the p50/p95
wall time of both solvers next to the 30 ms horizon budget and the 1 ms
whole-body budget.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from app.config import get_settings
from app.main import resolve_scenario_path
from app.schemas import load_scenario
from services.runner import ScenarioRunner

BUDGETS_MS = {"mpc": 30.0, "wbc": 1.0}


def collect_timings(scenario_name: str, duration: Optional[float], horizon: Optional[int]) -> dict:
    settings = get_settings()
    scenario = load_scenario(resolve_scenario_path(scenario_name, settings))
    scenario = scenario.with_overrides(duration=duration)
    if horizon is not None:
        scenario = scenario.model_copy(update={"mpc": scenario.mpc.model_copy(update={"horizon": horizon})})
    report = ScenarioRunner(settings).run(scenario).report
    timings: dict[str, dict[str, float]] = {}
    for name, budget in BUDGETS_MS.items():
        p50 = report.metrics.get(f"{name}_p50_ms", 0.0)
        p95 = report.metrics.get(f"{name}_p95_ms", 0.0)
        timings[name] = {"p50_ms": p50, "p95_ms": p95, "budget_ms": budget, "within_budget": p95 <= budget}
    timings["run"] = {"status": report.status, "simulated_time": report.simulated_time, "ticks": report.ticks}
    return timings


def print_table(timings: dict) -> None:
    header = f"{'solver':<8}{'p50 [ms]':>12}{'p95 [ms]':>12}{'budget':>10}  verdict"
    print(header)
    print("-" * len(header))
    for name in BUDGETS_MS:
        row = timings[name]
        verdict = "ok" if row["within_budget"] else "OVER"
        print(f"{name:<8}{row['p50_ms']:>12.3f}{row['p95_ms']:>12.3f}{row['budget_ms']:>10.1f}  {verdict}")
    run = timings["run"]
    print(f"\n{run['ticks']} control ticks over {run['simulated_time']:.2f} s ({run['status']})")


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--scenario", default="walk_in_place", help="Scenario file or bundled scenario name")
    parser.add_argument("--duration", type=float, default=2.0, help="Simulated seconds to time")
    parser.add_argument("--horizon", type=int, help="Override the horizon length (default from the scenario)")
    parser.add_argument("--export", type=Path, help="Optional JSON file to store the timings")
    args = parser.parse_args(argv)

    timings = collect_timings(args.scenario, args.duration, args.horizon)
    print_table(timings)
    if args.export:
        args.export.parent.mkdir(parents=True, exist_ok=True)
        args.export.write_text(json.dumps(timings, indent=2), encoding="utf-8")
        print(f"\nTimings written to {args.export}")
    return 0 if all(timings[name]["within_budget"] for name in BUDGETS_MS) else 1


if __name__ == "__main__":
    sys.exit(main())
