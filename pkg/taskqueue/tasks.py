"""RQ tasks that run one load-sweep point each."""

from __future__ import annotations

import logging
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Any

from rq import get_current_job as rq_get_current_job

UTC = timezone.utc

logger = logging.getLogger(__name__)


_current_job_ctx: ContextVar[Any | None] = ContextVar("locomanip_current_job", default=None)


def set_current_job(job: Any | None) -> None:
    _current_job_ctx.set(job)


def clear_current_job() -> None:
    _current_job_ctx.set(None)


def get_current_job():  # type: ignore[override]
    try:
        job = rq_get_current_job()
    except Exception:  # pragma: no cover - no Redis connection in scope
        job = None
    if job is not None:
        return job
    return _current_job_ctx.get()


def _update_job_meta(meta: dict) -> None:
    job = get_current_job()
    if job is None:
        return
    job.meta.setdefault("progress", 0)
    job.meta.update(meta)
    job.meta["updated_at"] = datetime.now(UTC).isoformat()
    try:
        job.save_meta()
    except Exception:  # pragma: no cover - fallback queue has no persistence
        pass


def sweep_point_job(scenario_data: dict, mass: float, pitch_limit: float, com_error_limit: float) -> dict:
    """Worker entrypoint: run the base scenario carrying ``mass`` and return its ``SweepPoint``."""

    from app.schemas import Scenario, SweepPoint
    from services.runner import ScenarioRunner, is_stable

    _update_job_meta({"status": "running", "mass": mass})
    scenario = Scenario.model_validate(scenario_data).with_overrides(object_mass=mass)
    report = ScenarioRunner().run(scenario).report
    stable = is_stable(report, pitch_limit, com_error_limit)
    point = SweepPoint(
        mass=mass,
        stable=stable,
        max_abs_pitch=report.metrics.get("max_abs_pitch"),
        com_error_max=report.metrics.get("com_error_max"),
        status=report.status,
    )
    _update_job_meta({"status": "completed", "progress": 100, "stable": stable})
    logger.info("Sweep point finished", extra={"mass": mass, "stable": stable, "status": report.status})
    return point.model_dump()
