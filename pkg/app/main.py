"""Command-line entry point: run, compare and sweep bundled or user scenarios."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import structlog

from app.config import Settings, get_settings
from dynamics.errors import LocomanipError, MetricMismatchError, ModelFileError, ScenarioError

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2

logger = structlog.get_logger(__name__)


def configure_logging(settings: Settings) -> None:
    logging.basicConfig(level=getattr(logging, settings.log_level.upper(), logging.INFO))
    renderer = (
        structlog.processors.JSONRenderer()
        if settings.log_format == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.add_log_level,
            renderer,
        ]
    )


def resolve_scenario_path(value: str, settings: Settings) -> Path:
    candidate = Path(value)
    if candidate.exists():
        return candidate
    for name in (value, f"{value}.yaml"):
        bundled = settings.scenarios_dir / name
        if bundled.exists():
            return bundled
    raise ScenarioError(f"Scenario {value!r} not found (looked in {settings.scenarios_dir})")


def _load(args: argparse.Namespace, settings: Settings):
    from app.schemas import load_scenario

    scenario = load_scenario(resolve_scenario_path(args.scenario, settings))
    overrides = {
        "seed": getattr(args, "seed", None),
        "model_variant": getattr(args, "model", None),
        "duration": getattr(args, "duration", None),
    }
    try:
        return scenario.with_overrides(**overrides)
    except ValueError as exc:
        raise ScenarioError(f"Invalid override: {exc}") from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    from services.runner import ScenarioRunner
    from storage.traces import render_report

    scenario = _load(args, settings)
    out_dir = args.out or Path(settings.output_dir)
    result = ScenarioRunner(settings).run(scenario, out_dir=out_dir)
    print(render_report(result.report))
    if result.output_dir is not None:
        print(f"\nTrace and report written to {result.output_dir}")
    logger.info("run finished", scenario=scenario.name, status=result.report.status, passed=result.report.passed)
    return EXIT_OK if result.report.passed else EXIT_FAILED


def cmd_compare(args: argparse.Namespace, settings: Settings) -> int:
    from services.runner import compare
    from storage.traces import load_report, render_comparison

    report_a, report_b = load_report(args.report_a), load_report(args.report_b)
    label_a = args.label_a or f"{report_a.scenario}/m{report_a.model_variant}"
    label_b = args.label_b or f"{report_b.scenario}/m{report_b.model_variant}"
    table = compare(report_a, report_b, label_a=label_a, label_b=label_b)
    print(render_comparison(table))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, settings: Settings) -> int:
    from services.runner import load_capacity_sweep
    from storage.traces import render_sweep

    scenario = _load(args, settings)
    report = load_capacity_sweep(scenario, args.masses, settings=settings)
    print(render_sweep(report))
    out_dir = args.out or Path(settings.output_dir)
    target = Path(out_dir) / scenario.name / "sweep.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return EXIT_OK if report.monotone else EXIT_FAILED


def cmd_list(args: argparse.Namespace, settings: Settings) -> int:
    from app.schemas import load_scenario

    for path in sorted(settings.scenarios_dir.glob("*.yaml")):
        try:
            scenario = load_scenario(path)
        except ScenarioError as exc:
            print(f"{path.stem:<28} INVALID: {exc}")
            continue
        summary = f"{scenario.duration:>6.1f} s  model {scenario.model_variant}"
        print(f"{scenario.name:<28} {summary}  {scenario.description}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, settings: Settings) -> int:
    from services.runner import ScenarioRunner

    scenario = _load(args, settings)
    ScenarioRunner(settings).resolve_model(scenario)
    scenario.timeline()
    print(f"{scenario.name}: ok")
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace, settings: Settings) -> int:
    from app import metrics

    target = metrics.export(args.export)
    print(f"Metrics written to {target}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locomanip",
        description="Contact-schedule MPC + whole-body control for humanoid loco-manipulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", required=True, help="Scenario file or bundled scenario name.")
        p.add_argument("--seed", type=int, help="Override the scenario seed.")
        p.add_argument("--model", type=int, choices=(1, 2), help="1 = combined body, 2 = external force.")
        p.add_argument("--duration", type=float, help="Override the simulated duration in seconds.")

    run_p = sub.add_parser("run", help="Run one scenario and write its trace and report.")
    scenario_flags(run_p)
    run_p.add_argument("--out", type=Path, help="Output directory (default: settings.output_dir).")
    run_p.set_defaults(handler=cmd_run)

    compare_p = sub.add_parser("compare", help="Compare two run reports metric by metric.")
    compare_p.add_argument("report_a", type=Path)
    compare_p.add_argument("report_b", type=Path)
    compare_p.add_argument("--label-a", dest="label_a")
    compare_p.add_argument("--label-b", dest="label_b")
    compare_p.set_defaults(handler=cmd_compare)

    sweep_p = sub.add_parser("sweep", help="Load-capacity sweep over object masses.")
    scenario_flags(sweep_p)
    sweep_p.add_argument("--masses", type=float, nargs="+", help="Increasing mass grid in kg.")
    sweep_p.add_argument("--out", type=Path)
    sweep_p.set_defaults(handler=cmd_sweep)

    list_p = sub.add_parser("list-scenarios", help="List bundled scenarios.")
    list_p.set_defaults(handler=cmd_list)

    validate_p = sub.add_parser("validate", help="Schema-check a scenario without running it.")
    scenario_flags(validate_p)
    validate_p.set_defaults(handler=cmd_validate)

    metrics_p = sub.add_parser("metrics", help="Export the Prometheus registry as text.")
    metrics_p.add_argument("--export", type=Path, required=True)
    metrics_p.set_defaults(handler=cmd_metrics)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        settings = get_settings()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    configure_logging(settings)
    try:
        return args.handler(args, settings)
    except (ScenarioError, ModelFileError, MetricMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except LocomanipError as exc:
        logger.error("run failed", error=repr(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
