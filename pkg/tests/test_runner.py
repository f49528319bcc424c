from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from app.schemas import RunReport, SweepPoint, load_scenario
from dynamics.errors import MetricMismatchError, ScenarioError
from services import runner
from services.runner import ScenarioRunner, compare, is_stable, load_capacity_sweep, summarize_sweep
from storage.traces import read_trace

SCENARIOS = Path(__file__).resolve().parents[1] / "assets" / "scenarios"


def _report(status: str = "completed", **metrics) -> RunReport:
    return RunReport(
        scenario="bench", model_variant=2, seed=0, status=status, simulated_time=1.0, ticks=10, metrics=metrics
    )


class FakeJob:
    def __init__(self, result=None, status="finished") -> None:
        self._result = result
        self._status = status
        self.exc_info = None if status == "finished" else "boom"

    def get_status(self) -> str:
        return self._status

    def return_value(self):
        return self._result


class FakeQueue:
    """Finishes every job on enqueue; masses above ``limit`` tip over, ``broken`` ones fail."""

    def __init__(self, limit: float, broken=()) -> None:
        self.limit = limit
        self.broken = set(broken)
        self.calls = []

    def enqueue(self, func, scenario_data, mass, pitch_limit, com_error_limit, **kwargs):
        self.calls.append((func, mass, pitch_limit, com_error_limit, kwargs))
        if mass in self.broken:
            return FakeJob(status="failed")
        point = SweepPoint(mass=mass, stable=mass <= self.limit, max_abs_pitch=0.01 * mass)
        return FakeJob(point.model_dump())


def test_zero_duration_run_writes_empty_trace(settings, tmp_path):
    scenario = load_scenario(SCENARIOS / "walk_in_place.yaml").with_overrides(duration=0.0)
    result = ScenarioRunner(settings).run(scenario, out_dir=tmp_path)
    assert result.report.status == "completed"
    assert result.report.ticks == 0
    assert result.report.passed
    assert result.output_dir == tmp_path / "walk_in_place"
    trace = read_trace(result.report.trace_path)
    assert trace["time"].size == 0
    assert (result.output_dir / "report.json").exists()


def test_unknown_model_and_posture_joint(settings):
    scenario = load_scenario(SCENARIOS / "walk_in_place.yaml")
    with pytest.raises(ScenarioError, match="not found"):
        ScenarioRunner(settings).resolve_model(scenario.with_overrides(model="nope.yaml"))
    bad = scenario.with_overrides(duration=0.0, initial={"posture": {"tail": 0.1}})
    with pytest.raises(ScenarioError, match="unknown joint"):
        ScenarioRunner(settings).run(bad)


def test_compare_picks_winners_per_metric():
    a = _report(max_abs_pitch=0.10, mpc_feasibility_rate=1.0, com_error_rms=0.02)
    b = _report(max_abs_pitch=0.05, mpc_feasibility_rate=0.9, com_error_rms=0.02)
    table = compare(a, b, label_a="m1", label_b="m2")
    winners = {row.metric: row.winner for row in table.rows}
    assert winners == {"max_abs_pitch": "b", "mpc_feasibility_rate": "a", "com_error_rms": "tie"}
    assert table.rows[[row.metric for row in table.rows].index("max_abs_pitch")].delta == pytest.approx(-0.05)

    with pytest.raises(MetricMismatchError, match="com_error_rms"):
        compare(a, _report(max_abs_pitch=0.1, mpc_feasibility_rate=1.0))


def test_stability_verdict():
    assert is_stable(_report(max_abs_pitch=0.1, com_error_max=0.01), 0.3, 0.05)
    assert not is_stable(_report(max_abs_pitch=0.4, com_error_max=0.01), 0.3, 0.05)
    assert not is_stable(_report(max_abs_pitch=0.1, com_error_max=0.2), 0.3, 0.05)
    assert not is_stable(_report("fallen", max_abs_pitch=0.1), 0.3, 0.05)


def test_summarize_sweep_stops_at_first_unstable_mass():
    points = [SweepPoint(mass=m, stable=s) for m, s in [(0.0, True), (2.0, True), (4.0, False), (6.0, False)]]
    report = summarize_sweep("bench", points)
    assert report.max_stable_mass == 2.0
    assert report.monotone

    flaky = summarize_sweep(
        "bench", [SweepPoint(mass=m, stable=s) for m, s in [(0.0, True), (1.0, False), (2.0, True)]]
    )
    assert flaky.max_stable_mass == 0.0
    assert not flaky.monotone

    assert summarize_sweep("bench", [SweepPoint(mass=0.0, stable=False)]).max_stable_mass is None


def test_load_sweep_dispatches_one_job_per_mass(settings):
    scenario = load_scenario(SCENARIOS / "load_sweep.yaml")
    queue = FakeQueue(limit=4.0, broken={8.0})
    report = load_capacity_sweep(scenario, [0.0, 2.0, 4.0, 6.0, 8.0], settings=settings, queue=queue)

    assert [call[1] for call in queue.calls] == [0.0, 2.0, 4.0, 6.0, 8.0]
    func, _, pitch_limit, com_error_limit, kwargs = queue.calls[0]
    assert func is runner.sweep_point_job
    assert (pitch_limit, com_error_limit) == (0.3, 0.05)
    assert kwargs["job_timeout"] == settings.rq_job_timeout
    assert report.max_stable_mass == 4.0
    assert report.points[-1].status == "failed"
    assert report.monotone


def test_load_sweep_uses_scenario_grid_and_validates(settings):
    scenario = load_scenario(SCENARIOS / "load_sweep.yaml")
    report = load_capacity_sweep(scenario, settings=settings, queue=FakeQueue(limit=100.0))
    assert [p.mass for p in report.points] == scenario.sweep.masses

    with pytest.raises(ScenarioError, match="mass grid"):
        load_capacity_sweep(scenario, [2.0, 1.0], settings=settings, queue=FakeQueue(limit=1.0))
    no_object = load_scenario(SCENARIOS / "walk_in_place.yaml")
    with pytest.raises(ScenarioError, match="object"):
        load_capacity_sweep(no_object, [1.0], settings=settings, queue=FakeQueue(limit=1.0))


@pytest.mark.slow
def test_runs_are_deterministic_for_a_seed(settings, tmp_path):
    scenario = load_scenario(SCENARIOS / "walk_in_place.yaml").with_overrides(duration=0.05, seed=4)
    first = ScenarioRunner(settings).run(scenario)
    second = ScenarioRunner(settings).run(scenario)
    assert first.report.ticks == second.report.ticks > 0
    columns = ["com_z", "pitch", "f1_z"]
    assert np.array_equal(first.trace.block(columns), second.trace.block(columns))
    assert first.report.metrics["max_abs_pitch"] < 0.1
