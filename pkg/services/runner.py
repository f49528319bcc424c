"""End-to-end scenario runs, report comparison and the load-capacity sweep."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app import metrics
from app.config import Settings, get_settings
from app.infra.redis_conn import get_queue
from app.schemas import (
    CheckResult,
    ChecksSpec,
    ComparisonTable,
    MetricComparison,
    RunReport,
    Scenario,
    SweepPoint,
    SweepReport,
    SweepSpec,
)
from control.contact_schedule import Timeline, flags_at
from control.controller import ControlOutput, LocoManipulationController
from control.mpc import robot_com_from_combined
from dynamics import rigid_body
from dynamics.errors import AttachError, MetricMismatchError, ScenarioError, SimulationBlowUpError
from dynamics.robot_model import GRAVITY, ActuatorLimits, BodyParams, KinematicTree, load_model
from sim.plant import Measurement, Plant, PlantState
from storage.traces import TraceRecorder, write_report, write_trace
from taskqueue.tasks import sweep_point_job

logger = logging.getLogger(__name__)

HIGHER_IS_BETTER = frozenset({"mpc_feasibility_rate", "torque_limit_margin"})
_TIE = 1e-12


@dataclass
class RunResult:
    report: RunReport
    trace: TraceRecorder
    output_dir: Optional[Path] = None


@dataclass
class _RunLog:
    """Per-tick quantities that feed the metrics but are not trace columns."""

    reference_com: List[np.ndarray] = field(default_factory=list)
    actual_com: List[np.ndarray] = field(default_factory=list)
    f_ext_errors: List[float] = field(default_factory=list)
    mpc_feasible: List[bool] = field(default_factory=list)
    mpc_times: List[float] = field(default_factory=list)
    wbc_times: List[float] = field(default_factory=list)
    wbc_infeasible: int = 0
    releases: List[Tuple[float, np.ndarray]] = field(default_factory=list)
    attach_failures: int = 0


class ScenarioRunner:
    """Builds plant and controller from a scenario and steps them on the plant clock."""

    def __init__(self, settings: Optional[Settings] = None) -> None:
        self.settings = settings or get_settings()

    def resolve_model(self, scenario: Scenario) -> Path:
        candidate = Path(scenario.model)
        if candidate.exists():
            return candidate
        bundled = self.settings.models_dir / scenario.model
        if bundled.exists():
            return bundled
        raise ScenarioError(f"Model file {scenario.model!r} not found in {self.settings.models_dir}")

    def _initial_state(self, scenario: Scenario, tree: KinematicTree, plant: Plant) -> PlantState:
        q0 = np.array(tree.nominal_q if tree.nominal_q is not None else np.zeros(tree.nq), dtype=float)
        names = {link.joint_name: link.q_index for link in tree.links}
        for joint, value in scenario.initial.posture.items():
            if joint not in names:
                raise ScenarioError(f"initial.posture references unknown joint {joint!r}")
            q0[names[joint]] = value
        if scenario.initial.joint_noise > 0.0:
            rng = np.random.default_rng(scenario.seed)
            act = tree.actuated_indices
            q0[act] += rng.normal(scale=scenario.initial.joint_noise, size=act.size)
        if tree.floating_base:
            q0[2] = plant.standing_height(q0)

        spec = scenario.object
        if spec is None:
            return plant.initial_state(q0)
        if spec.start_in_hand:
            if spec.hand >= len(tree.hands):
                raise ScenarioError(f"object.hand {spec.hand} does not exist on {tree.name}")
            kin = rigid_body.forward_kinematics(tree, q0)
            frame = tree.hands[spec.hand]
            position = kin.point(frame.link, frame.point)
            state = plant.initial_state(q0, object_position=position)
            return plant.attach_object(state, hand=spec.hand)
        return plant.initial_state(q0, object_position=spec.position)

    def _record(
        self,
        recorder: TraceRecorder,
        log: _RunLog,
        t: float,
        meas: Measurement,
        out: ControlOutput,
        controller: LocoManipulationController,
        body: BodyParams,
        scenario: Scenario,
    ) -> None:
        snapshot = out.snapshot
        wbc_status = "infeasible" if out.wbc_flagged else (out.wbc.status if out.wbc is not None else "none")
        recorder.append(
            t,
            meas.body.augmented(),
            np.concatenate([snapshot.u, snapshot.f_ext]),
            out.tau,
            out.flags.as_tuple(),
            snapshot.status,
            wbc_status,
        )
        reference = controller.reference_state
        if reference is not None:
            target = reference[3:6]
            if scenario.model_variant == 1 and meas.attached and meas.object_position is not None:
                target = robot_com_from_combined(target, body.m_ub, meas.object_position, scenario.object.mass)
            log.reference_com.append(target)
            log.actual_com.append(meas.body.p_c.copy())
        if out.wbc_ran and out.wbc is not None and not out.wbc_flagged:
            log.wbc_times.append(out.wbc.solve_time)
        if out.mpc_ran:
            log.mpc_feasible.append(not out.mpc_flagged)
            if not out.mpc_flagged:
                log.mpc_times.append(snapshot.solve_time)
                if out.flags.e and scenario.model_variant == 2 and scenario.object is not None:
                    expected = np.array([0.0, 0.0, scenario.object.mass * GRAVITY])
                    log.f_ext_errors.append(float(np.linalg.norm(snapshot.f_ext - expected)))

    def _mpc_config(self, scenario: Scenario):
        """Settings fill solver knobs the scenario leaves unset."""

        defaults = {name: getattr(self.settings, name) for name in ("pitch_guard", "qp_tol", "qp_max_iter")}
        update = {name: value for name, value in defaults.items() if name not in scenario.mpc.model_fields_set}
        return scenario.mpc.model_copy(update=update)

    def run(self, scenario: Scenario, out_dir: Optional[Path | str] = None) -> RunResult:
        settings = self.settings
        body, tree, limits = load_model(self.resolve_model(scenario))
        obj = scenario.object.params() if scenario.object is not None else None
        plant = Plant(
            tree,
            limits,
            ground=scenario.ground,
            obj=obj,
            dt=settings.plant_dt,
            integrator=scenario.integrator,
            attach_threshold=settings.attach_threshold,
        )
        plan = scenario.plan()
        controller = LocoManipulationController(
            body,
            tree,
            limits,
            plan,
            mpc_cfg=self._mpc_config(scenario),
            wbc_cfg=scenario.wbc,
            wbc_rate_hz=settings.wbc_rate_hz,
        )
        state = self._initial_state(scenario, tree, plant)
        recorder = TraceRecorder(joint_names=limits.joint_names)
        log = _RunLog()
        status, reason = "completed", None
        previous_e = flags_at(plan.timeline, 0.0).e if state.attached else 0
        steps = int(round(scenario.duration / settings.plant_dt))
        started = time.perf_counter()
        t = 0.0
        for i in range(steps):
            t = i * settings.plant_dt
            state, previous_e = self._object_events(scenario, plan.timeline, plant, state, t, previous_e, log)
            meas = plant.measure(state)
            out = controller.tick(t, meas)
            if out.wbc_flagged:
                log.wbc_infeasible += 1
            if out.wbc_ran:
                self._record(recorder, log, t, meas, out, controller, body, scenario)
            if max(abs(meas.body.theta[0]), abs(meas.body.theta[1])) > scenario.fall_pitch:
                status, reason = "fallen", f"tilt exceeded {scenario.fall_pitch:.2f} rad at t={t:.3f} s"
                break
            try:
                state = plant.step(state, out.tau)
            except SimulationBlowUpError as exc:
                status, reason = "aborted", str(exc)
                logger.error("Simulation blew up", extra={"scenario": scenario.name, "time": exc.time})
                break
        else:
            t = steps * settings.plant_dt

        report = self._report(scenario, status, reason, t, recorder, log, limits)
        logger.info(
            "Scenario finished",
            extra={
                "scenario": scenario.name,
                "status": status,
                "passed": report.passed,
                "wall_seconds": round(time.perf_counter() - started, 3),
            },
        )
        metrics.observe_run(status, log.mpc_times, log.wbc_times, log.mpc_feasible.count(False), log.wbc_infeasible)

        output_dir = None
        if out_dir is not None:
            output_dir = Path(out_dir) / scenario.name
            trace_path = write_trace(output_dir / "trace.csv", recorder)
            report = report.model_copy(update={"trace_path": str(trace_path)})
            write_report(report, output_dir)
        return RunResult(report=report, trace=recorder, output_dir=output_dir)

    def _object_events(
        self,
        scenario: Scenario,
        timeline: Timeline,
        plant: Plant,
        state: PlantState,
        t: float,
        previous_e: int,
        log: _RunLog,
    ) -> Tuple[PlantState, int]:
        """Attach on a rising ``e`` edge and release on a falling one."""

        e = flags_at(timeline, t).e
        if e == previous_e or scenario.object is None or state.object is None:
            return state, e
        if e and not state.attached:
            try:
                state = plant.attach_object(state, hand=scenario.object.hand)
            except AttachError as exc:
                log.attach_failures += 1
                logger.warning("Pickup failed", extra={"time": round(t, 4), "error": str(exc)})
        elif not e and state.attached:
            state = plant.detach_object(state)
            log.releases.append((t, state.object.position.copy()))
        return state, e

    # -- report ------------------------------------------------------------------

    def _report(
        self,
        scenario: Scenario,
        status: str,
        reason: Optional[str],
        t: float,
        recorder: TraceRecorder,
        log: _RunLog,
        limits: ActuatorLimits,
    ) -> RunReport:
        values: Dict[str, float] = {}
        max_torque: Dict[str, float] = {}
        if len(recorder):
            pitch = recorder.column("pitch")
            values["max_abs_pitch"] = float(np.max(np.abs(pitch)))
            values["pitch_rms"] = float(np.sqrt(np.mean(pitch**2)))
            tau = recorder.block([f"tau_{name}" for name in limits.joint_names])
            peaks = np.max(np.abs(tau), axis=0)
            max_torque = {name: float(peak) for name, peak in zip(limits.joint_names, peaks)}
            values["torque_limit_margin"] = float(np.min(limits.tau_max - peaks))
        if log.reference_com:
            error = np.array(log.actual_com) - np.array(log.reference_com)
            norms = np.linalg.norm(error, axis=1)
            values["com_error_rms"] = float(np.sqrt(np.mean(norms**2)))
            values["com_error_max"] = float(np.max(norms))
            values["height_error_rms"] = float(np.sqrt(np.mean(error[:, 2] ** 2)))
        if log.mpc_feasible:
            values["mpc_feasibility_rate"] = float(np.mean(log.mpc_feasible))
        for name, samples in (("mpc", log.mpc_times), ("wbc", log.wbc_times)):
            if samples:
                values[f"{name}_p50_ms"] = float(np.percentile(samples, 50) * 1e3)
                values[f"{name}_p95_ms"] = float(np.percentile(samples, 95) * 1e3)
        if log.f_ext_errors:
            values["f_ext_max_error"] = float(max(log.f_ext_errors))
        values["attach_failures"] = float(log.attach_failures)

        checks = evaluate_checks(scenario.checks, status, values, log.releases)
        return RunReport(
            scenario=scenario.name,
            model_variant=scenario.model_variant,
            seed=scenario.seed,
            status=status,
            abort_reason=reason,
            simulated_time=float(t),
            ticks=len(recorder),
            metrics=values,
            max_torque=max_torque,
            checks=checks,
        )


def _upper_bound(name: str, value: Optional[float], threshold: float) -> CheckResult:
    if value is None:
        return CheckResult(name=name, passed=True, threshold=threshold, detail="no samples")
    return CheckResult(name=name, passed=value <= threshold, value=value, threshold=threshold)


def evaluate_checks(
    checks: ChecksSpec, status: str, values: Dict[str, float], releases: Sequence[Tuple[float, np.ndarray]]
) -> List[CheckResult]:
    results: List[CheckResult] = []
    if checks.completes:
        results.append(CheckResult(name="completes", passed=status == "completed", detail=status))
    if checks.max_abs_pitch is not None:
        results.append(_upper_bound("max_abs_pitch", values.get("max_abs_pitch"), checks.max_abs_pitch))
    if checks.com_error_max is not None:
        results.append(_upper_bound("com_error_max", values.get("com_error_max"), checks.com_error_max))
    if checks.height_error_rms is not None:
        results.append(_upper_bound("height_error_rms", values.get("height_error_rms"), checks.height_error_rms))
    if checks.torque_within_limits:
        margin = values.get("torque_limit_margin")
        results.append(
            CheckResult(
                name="torque_within_limits",
                passed=margin is None or margin >= -1e-9,
                value=margin,
                threshold=0.0,
            )
        )
    if checks.mpc_feasible:
        rate = values.get("mpc_feasibility_rate")
        results.append(
            CheckResult(name="mpc_feasible", passed=rate is None or rate >= 1.0, value=rate, threshold=1.0)
        )
    if checks.f_ext_equality is not None:
        results.append(_upper_bound("f_ext_equality", values.get("f_ext_max_error"), checks.f_ext_equality))
    if checks.object_at_release is not None:
        target = np.asarray(checks.object_at_release.position, dtype=float)
        if releases:
            distance = float(np.linalg.norm(releases[-1][1] - target))
            results.append(
                CheckResult(
                    name="object_at_release",
                    passed=distance <= checks.object_at_release.tolerance,
                    value=distance,
                    threshold=checks.object_at_release.tolerance,
                )
            )
        else:
            results.append(CheckResult(name="object_at_release", passed=False, detail="object was never released"))
    return results


def run(scenario: Scenario, out_dir: Optional[Path | str] = None, settings: Optional[Settings] = None) -> RunResult:
    return ScenarioRunner(settings).run(scenario, out_dir)


def compare(report_a: RunReport, report_b: RunReport, label_a: str = "a", label_b: str = "b") -> ComparisonTable:
    """Side-by-side metric deltas (b - a) with a winner per metric."""

    keys_a, keys_b = set(report_a.metrics), set(report_b.metrics)
    if keys_a != keys_b:
        missing = sorted(keys_a.symmetric_difference(keys_b))
        raise MetricMismatchError(f"Reports do not carry the same metrics: {', '.join(missing)}")
    rows = []
    for name in sorted(keys_a):
        a, b = report_a.metrics[name], report_b.metrics[name]
        delta = b - a
        if abs(delta) <= _TIE:
            winner = "tie"
        elif (delta > 0) == (name in HIGHER_IS_BETTER):
            winner = "b"
        else:
            winner = "a"
        rows.append(MetricComparison(metric=name, a=a, b=b, delta=delta, winner=winner))
    return ComparisonTable(label_a=label_a, label_b=label_b, rows=rows)


def is_stable(report: RunReport, pitch_limit: float, com_error_limit: float) -> bool:
    """Upright for the whole run with the CoM kept near its reference."""

    if report.status != "completed":
        return False
    pitch = report.metrics.get("max_abs_pitch")
    error = report.metrics.get("com_error_max")
    return (pitch is None or pitch < pitch_limit) and (error is None or error < com_error_limit)


def _job_result(job: Any) -> Any:
    return job.return_value()


def load_capacity_sweep(
    scenario: Scenario,
    masses: Optional[Sequence[float]] = None,
    *,
    settings: Optional[Settings] = None,
    queue: Any = None,
    poll_interval: float = 0.05,
) -> SweepReport:
    """Run the base scenario once per object mass and report the largest mass held upright."""

    settings = settings or get_settings()
    if scenario.object is None:
        raise ScenarioError("a load sweep needs a scenario with an object")
    try:
        if masses is not None:
            base = scenario.sweep or SweepSpec(masses=[0.0])
            spec = SweepSpec(masses=list(masses), pitch_limit=base.pitch_limit, com_error_limit=base.com_error_limit)
        elif scenario.sweep is not None:
            spec = scenario.sweep
        else:
            raise ValueError("no mass grid given and the scenario has no sweep block")
    except ValueError as exc:
        raise ScenarioError(f"Invalid mass grid: {exc}") from exc
    queue = queue or get_queue(settings=settings)
    data = scenario.model_dump(mode="json")

    pending = list(spec.masses)
    running: List[Tuple[float, Any]] = []
    points: List[SweepPoint] = []
    while pending or running:
        while pending and len(running) < settings.sweep_workers:
            mass = pending.pop(0)
            job = queue.enqueue(
                sweep_point_job,
                data,
                mass,
                spec.pitch_limit,
                spec.com_error_limit,
                meta={"status": "queued", "progress": 0, "mass": mass},
                job_timeout=settings.rq_job_timeout,
            )
            running.append((mass, job))
        still_running = []
        for mass, job in running:
            status = job.get_status()
            if status == "finished":
                points.append(SweepPoint.model_validate(_job_result(job)))
            elif status == "failed":
                logger.warning("Sweep point failed", extra={"mass": mass, "error": getattr(job, "exc_info", None)})
                points.append(SweepPoint(mass=mass, stable=False, status="failed"))
            else:
                still_running.append((mass, job))
        running = still_running
        if running:
            time.sleep(poll_interval)

    points.sort(key=lambda point: point.mass)
    return summarize_sweep(scenario.name, points)


def summarize_sweep(name: str, points: Sequence[SweepPoint]) -> SweepReport:
    max_stable = None
    for point in points:
        if not point.stable:
            break
        max_stable = point.mass
    verdicts = [point.stable for point in points]
    monotone = all(not (later and not earlier) for earlier, later in zip(verdicts, verdicts[1:]))
    if max_stable is not None and metrics.enabled():
        metrics.SWEEP_MAX_STABLE_MASS.set(max_stable)
    logger.info("Load sweep finished", extra={"scenario": name, "max_stable_mass": max_stable, "monotone": monotone})
    return SweepReport(scenario=name, points=list(points), max_stable_mass=max_stable, monotone=monotone)
