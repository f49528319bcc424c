"""CSV traces and run reports on local disk."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
from pydantic import ValidationError

from app.schemas import ComparisonTable, RunReport, SweepReport
from dynamics.errors import ScenarioError

logger = logging.getLogger(__name__)

STATE_COLUMNS = (
    "roll", "pitch", "yaw",
    "com_x", "com_y", "com_z",
    "omega_x", "omega_y", "omega_z",
    "com_vx", "com_vy", "com_vz",
    "g_x", "g_y", "g_z",
)  # fmt: skip
INPUT_COLUMNS = (
    "f1_x", "f1_y", "f1_z",
    "f2_x", "f2_y", "f2_z",
    "m1_y", "m1_z", "m2_y", "m2_z",
    "fext_x", "fext_y", "fext_z",
)  # fmt: skip
FLAG_COLUMNS = ("c1", "c2", "e", "h1", "h2")
STATUS_COLUMNS = ("mpc_status", "wbc_status")
_FLOAT_FORMAT = "{:.9e}"


def trace_columns(joint_names: Sequence[str]) -> List[str]:
    """time, 15 states, 13 inputs, one torque per actuated joint, flags, QP statuses."""

    return (
        ["time"]
        + list(STATE_COLUMNS)
        + list(INPUT_COLUMNS)
        + [f"tau_{name}" for name in joint_names]
        + list(FLAG_COLUMNS)
        + list(STATUS_COLUMNS)
    )


@dataclass
class TraceRecorder:
    """Rows of one run, kept in memory until the run ends (or aborts)."""

    joint_names: Sequence[str]
    rows: List[list] = field(default_factory=list)

    @property
    def columns(self) -> List[str]:
        return trace_columns(self.joint_names)

    def append(
        self,
        time: float,
        state: np.ndarray,
        u: np.ndarray,
        tau: np.ndarray,
        flags: Sequence[int],
        mpc_status: str,
        wbc_status: str,
    ) -> None:
        if len(state) != len(STATE_COLUMNS) or len(u) != len(INPUT_COLUMNS) or len(tau) != len(self.joint_names):
            raise ValueError("trace row does not match the column layout")
        self.rows.append(
            [float(time), *map(float, state), *map(float, u), *map(float, tau), *map(int, flags)]
            + [mpc_status, wbc_status]
        )

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        index = self.columns.index(name)
        if name in STATUS_COLUMNS:
            return np.array([row[index] for row in self.rows], dtype=object)
        return np.array([row[index] for row in self.rows], dtype=float)

    def block(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.column(name) for name in names]) if self.rows else np.zeros((0, len(names)))


def _format(value) -> str:
    if isinstance(value, float):
        return _FLOAT_FORMAT.format(value)
    return str(value)


def write_trace(path: Path | str, recorder: TraceRecorder) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(recorder.columns)
        for row in recorder.rows:
            writer.writerow([_format(value) for value in row])
    logger.info("Trace written", extra={"path": str(target), "rows": len(recorder)})
    return target


def read_trace(path: Path | str) -> Dict[str, np.ndarray]:
    source = Path(path)
    with source.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = list(reader)
    out: Dict[str, np.ndarray] = {}
    for index, name in enumerate(header):
        values = [row[index] for row in rows]
        out[name] = np.array(values, dtype=object) if name in STATUS_COLUMNS else np.array(values, dtype=float)
    return out


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def write_report(report: RunReport, directory: Path | str) -> Path:
    folder = Path(directory)
    folder.mkdir(parents=True, exist_ok=True)
    target = folder / "report.json"
    target.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    (folder / "report.txt").write_text(render_report(report) + "\n", encoding="utf-8")
    return target


def load_report(path: Path | str) -> RunReport:
    source = Path(path)
    if source.is_dir():
        source = source / "report.json"
    if not source.exists():
        raise ScenarioError(f"Report not found: {source}")
    try:
        return RunReport.model_validate_json(source.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise ScenarioError(f"Invalid report {source}: {exc}") from exc


def render_report(report: RunReport) -> str:
    lines = [
        f"scenario {report.scenario}  model {report.model_variant}  seed {report.seed}",
        f"status   {report.status}" + (f" ({report.abort_reason})" if report.abort_reason else ""),
        f"time     {report.simulated_time:.3f} s over {report.ticks} ticks",
        "",
        f"{'metric':<28}{'value':>14}",
    ]
    lines += [f"{name:<28}{value:>14.6g}" for name, value in sorted(report.metrics.items())]
    if report.max_torque:
        lines += ["", f"{'joint':<28}{'max |tau|':>14}"]
        lines += [f"{name:<28}{value:>14.4f}" for name, value in report.max_torque.items()]
    if report.checks:
        lines += ["", f"{'check':<28}{'value':>14}{'threshold':>14}  result"]
        for check in report.checks:
            value = "" if check.value is None else f"{check.value:.6g}"
            threshold = "" if check.threshold is None else f"{check.threshold:.6g}"
            verdict = "pass" if check.passed else "FAIL"
            lines.append(f"{check.name:<28}{value:>14}{threshold:>14}  {verdict}")
    return "\n".join(lines)


def render_comparison(table: ComparisonTable) -> str:
    header = f"{'metric':<28}{table.label_a:>16}{table.label_b:>16}{'delta':>14}  winner"
    lines = [header, "-" * len(header)]
    for row in table.rows:
        winner = {"a": table.label_a, "b": table.label_b, "tie": "tie"}[row.winner]
        lines.append(f"{row.metric:<28}{row.a:>16.6g}{row.b:>16.6g}{row.delta:>14.6g}  {winner}")
    return "\n".join(lines)


def render_sweep(report: SweepReport) -> str:
    lines = [f"{'mass [kg]':>10}  {'stable':<8}{'max |pitch|':>12}{'com err':>10}  status"]
    for point in report.points:
        pitch = "" if point.max_abs_pitch is None else f"{point.max_abs_pitch:.4f}"
        error = "" if point.com_error_max is None else f"{point.com_error_max:.4f}"
        lines.append(f"{point.mass:>10.2f}  {str(point.stable):<8}{pitch:>12}{error:>10}  {point.status}")
    best = "none" if report.max_stable_mass is None else f"{report.max_stable_mass:.2f} kg"
    lines.append(f"max stable mass: {best}  (monotone verdicts: {report.monotone})")
    return "\n".join(lines)
