from __future__ import annotations

import numpy as np
import pytest

from app.schemas import CheckResult, RunReport, SweepPoint, SweepReport
from dynamics.errors import ScenarioError
from storage.traces import (
    TraceRecorder,
    load_report,
    read_trace,
    render_report,
    render_sweep,
    trace_columns,
    write_report,
    write_trace,
)

JOINTS = ("knee", "ankle")


def _recorder() -> TraceRecorder:
    recorder = TraceRecorder(joint_names=JOINTS)
    for i in range(3):
        state = np.arange(15, dtype=float) + i
        tau = np.array([1.0, -2.0])
        recorder.append(0.001 * i, state, np.full(13, 0.5), tau, (1, 1, 0, 0, 0), "optimal", "optimal")
    return recorder


def test_column_layout():
    columns = trace_columns(JOINTS)
    assert columns[0] == "time"
    assert columns[1:4] == ["roll", "pitch", "yaw"]
    assert "tau_knee" in columns and "fext_z" in columns
    assert columns[-2:] == ["mpc_status", "wbc_status"]
    assert len(columns) == 1 + 15 + 13 + len(JOINTS) + 5 + 2


def test_rows_must_match_layout():
    recorder = TraceRecorder(joint_names=JOINTS)
    with pytest.raises(ValueError):
        recorder.append(0.0, np.zeros(14), np.zeros(13), np.zeros(2), (1, 1, 0, 0, 0), "optimal", "optimal")


def test_trace_written_and_read_back(tmp_path):
    recorder = _recorder()
    path = write_trace(tmp_path / "run" / "trace.csv", recorder)
    data = read_trace(path)
    assert list(data) == recorder.columns
    assert np.allclose(data["pitch"], [1.0, 2.0, 3.0])
    assert np.allclose(data["tau_ankle"], -2.0)
    assert list(data["mpc_status"]) == ["optimal"] * 3
    assert np.allclose(recorder.block(["roll", "yaw"])[:, 1], [2.0, 3.0, 4.0])


def test_report_files(tmp_path):
    report = RunReport(
        scenario="bench",
        model_variant=2,
        seed=0,
        status="completed",
        simulated_time=1.0,
        ticks=1000,
        metrics={"max_abs_pitch": 0.01},
        checks=[CheckResult(name="max_abs_pitch", passed=True, value=0.01, threshold=0.2)],
    )
    write_report(report, tmp_path)
    assert load_report(tmp_path) == report
    text = (tmp_path / "report.txt").read_text(encoding="utf-8")
    assert "max_abs_pitch" in text and "pass" in text
    assert render_report(report).startswith("scenario bench")

    with pytest.raises(ScenarioError):
        load_report(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{}", encoding="utf-8")
    with pytest.raises(ScenarioError):
        load_report(tmp_path / "bad.json")


def test_sweep_rendering():
    report = SweepReport(
        scenario="load_sweep",
        points=[SweepPoint(mass=0.0, stable=True, max_abs_pitch=0.01), SweepPoint(mass=2.0, stable=False)],
        max_stable_mass=0.0,
        monotone=True,
    )
    text = render_sweep(report)
    assert "max stable mass: 0.00 kg" in text
