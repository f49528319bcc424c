"""Prometheus instruments for solver timing, infeasibility and scenario outcomes."""

from __future__ import annotations

import logging
from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, generate_latest

from app.config import get_settings

logger = logging.getLogger(__name__)

REGISTRY = CollectorRegistry()
_NAMESPACE = get_settings().prometheus_namespace
_SOLVE_BUCKETS = (1e-4, 2.5e-4, 5e-4, 1e-3, 2.5e-3, 5e-3, 1e-2, 2e-2, 3e-2, 5e-2, 0.1, 0.25)

MPC_SOLVE_SECONDS = Histogram(
    "mpc_solve_seconds",
    "Wall time of one horizon QP solve",
    namespace=_NAMESPACE,
    buckets=_SOLVE_BUCKETS,
    registry=REGISTRY,
)
WBC_SOLVE_SECONDS = Histogram(
    "wbc_solve_seconds",
    "Wall time of one whole-body tick",
    namespace=_NAMESPACE,
    buckets=_SOLVE_BUCKETS,
    registry=REGISTRY,
)
MPC_INFEASIBLE = Counter(
    "mpc_infeasible_total",
    "Horizon solves that reported an infeasible QP",
    namespace=_NAMESPACE,
    registry=REGISTRY,
)
WBC_INFEASIBLE = Counter(
    "wbc_infeasible_total",
    "Whole-body ticks that reported an infeasible QP",
    namespace=_NAMESPACE,
    registry=REGISTRY,
)
SCENARIO_RUNS = Counter(
    "scenario_runs_total",
    "Scenario runs by outcome",
    ["status"],
    namespace=_NAMESPACE,
    registry=REGISTRY,
)
SWEEP_MAX_STABLE_MASS = Gauge(
    "sweep_max_stable_mass_kg",
    "Largest object mass held upright in the last load sweep",
    namespace=_NAMESPACE,
    registry=REGISTRY,
)


def enabled() -> bool:
    return get_settings().metrics_enabled


def observe_run(status: str, mpc_times, wbc_times, mpc_infeasible: int, wbc_infeasible: int) -> None:
    """Fold one finished run into the registry."""

    if not enabled():
        return
    for value in mpc_times:
        MPC_SOLVE_SECONDS.observe(value)
    for value in wbc_times:
        WBC_SOLVE_SECONDS.observe(value)
    if mpc_infeasible:
        MPC_INFEASIBLE.inc(mpc_infeasible)
    if wbc_infeasible:
        WBC_INFEASIBLE.inc(wbc_infeasible)
    SCENARIO_RUNS.labels(status=status).inc()


def export(path: Path | str) -> Path:
    """Write the registry in the Prometheus text format."""

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(generate_latest(REGISTRY))
    logger.info("Metrics exported", extra={"path": str(target)})
    return target
