"""Scenario and report schemas.

Scenario files are YAML documents validated here; unknown keys are rejected
so a typo never silently falls back to a default.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from control.contact_schedule import ContactFlags, Phase, Timeline, make_walk_gait
from control.controller import CommandSegment, ControlPlan, HandWaypoint
from control.mpc import Command, MpcConfig
from control.whole_body_control import WbcConfig
from dynamics.errors import ScenarioError
from dynamics.robot_model import ObjectParams
from sim.plant import GroundModel, Integrator

Vec3 = Tuple[float, float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _FlagFields(_Strict):
    c1: Literal[0, 1] = 1
    c2: Literal[0, 1] = 1
    e: Literal[0, 1] = 0
    h1: Literal[0, 1] = 0
    h2: Literal[0, 1] = 0

    def flags(self, **override: int) -> ContactFlags:
        values = {"c1": self.c1, "c2": self.c2, "e": self.e, "h1": self.h1, "h2": self.h2}
        values.update(override)
        return ContactFlags(**values)


class PhaseSpec(_FlagFields):
    kind: Literal["phase"] = "phase"
    start: float = Field(ge=0.0)
    label: str = ""


class WalkSpec(_FlagFields):
    """Alternating single stance from ``start`` for ``duration`` seconds."""

    kind: Literal["walk"]
    start: float = Field(ge=0.0)
    duration: float = Field(gt=0.0)
    period: float = Field(default=0.4, gt=0.0)
    overlap: float = Field(default=0.0, ge=0.0)
    label: str = "walk"


class CommandSpec(_Strict):
    start: float = Field(default=0.0, ge=0.0)
    velocity: Tuple[float, float] = (0.0, 0.0)
    yaw_rate: float = 0.0
    height: Optional[float] = Field(default=None, gt=0.0)
    yaw: Optional[float] = None

    def to_segment(self) -> CommandSegment:
        return CommandSegment(
            start=self.start,
            command=Command(velocity=self.velocity, yaw_rate=self.yaw_rate, height=self.height, yaw=self.yaw),
        )


class HandTargetSpec(_Strict):
    start: float = Field(ge=0.0)
    hand: int = Field(default=0, ge=0)
    position: Vec3
    frame: Literal["world", "body"] = "world"


class ObjectSpec(_Strict):
    mass: float = Field(ge=0.0)
    shape: Literal["box", "sphere"] = "box"
    size: float = Field(default=0.2, gt=0.0)
    position: Optional[Vec3] = None
    start_in_hand: bool = False
    hand: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _placed(self) -> "ObjectSpec":
        if self.position is None and not self.start_in_hand:
            raise ValueError("object needs a position unless it starts in the hand")
        return self

    def params(self) -> ObjectParams:
        return ObjectParams.solid(self.mass, self.shape, self.size)


class InitialSpec(_Strict):
    posture: Dict[str, float] = Field(default_factory=dict)
    joint_noise: float = Field(default=0.0, ge=0.0)


class ReleaseTarget(_Strict):
    position: Vec3
    tolerance: float = Field(default=0.1, gt=0.0)


class ChecksSpec(_Strict):
    """Pass/fail thresholds evaluated on the full trace; unset checks are skipped."""

    completes: bool = True
    max_abs_pitch: Optional[float] = Field(default=None, gt=0.0)
    com_error_max: Optional[float] = Field(default=None, gt=0.0)
    height_error_rms: Optional[float] = Field(default=None, gt=0.0)
    torque_within_limits: bool = False
    mpc_feasible: bool = False
    f_ext_equality: Optional[float] = Field(default=None, gt=0.0)
    object_at_release: Optional[ReleaseTarget] = None


class SweepSpec(_Strict):
    masses: List[float] = Field(min_length=1)
    pitch_limit: float = Field(default=0.3, gt=0.0)
    com_error_limit: float = Field(default=0.05, gt=0.0)

    @field_validator("masses")
    @classmethod
    def _monotone(cls, value: List[float]) -> List[float]:
        if any(m < 0.0 for m in value):
            raise ValueError("sweep masses must be non-negative")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("sweep masses must be strictly increasing")
        return value


class GaitSpec(_Strict):
    k_gain: float = Field(default=0.03, ge=0.0)
    apex: float = Field(default=0.08, ge=0.0)


class Scenario(_Strict):
    schema_version: Literal[1] = 1
    name: str
    description: str = ""
    model: str = "humanoid.yaml"
    duration: float = Field(ge=0.0)
    seed: int = 0
    model_variant: Literal[1, 2] = 2
    integrator: Integrator = Integrator.SEMI_IMPLICIT_EULER
    fall_pitch: float = Field(default=1.0, gt=0.0)
    initial: InitialSpec = Field(default_factory=InitialSpec)
    object: Optional[ObjectSpec] = None
    phases: List[Union[PhaseSpec, WalkSpec]] = Field(default_factory=lambda: [PhaseSpec(start=0.0)])
    commands: List[CommandSpec] = Field(default_factory=lambda: [CommandSpec()])
    hand_targets: List[HandTargetSpec] = Field(default_factory=list)
    gait: GaitSpec = Field(default_factory=GaitSpec)
    mpc: MpcConfig = Field(default_factory=MpcConfig)
    wbc: WbcConfig = Field(default_factory=WbcConfig)
    ground: GroundModel = Field(default_factory=GroundModel)
    checks: ChecksSpec = Field(default_factory=ChecksSpec)
    sweep: Optional[SweepSpec] = None

    @model_validator(mode="after")
    def _consistent(self) -> "Scenario":
        if not self.phases or self.phases[0].start != 0.0:
            raise ValueError("the first phase must start at t = 0")
        if self.commands[0].start != 0.0:
            raise ValueError("the first command must start at t = 0")
        if any(b.start < a.start for a, b in zip(self.commands, self.commands[1:])):
            raise ValueError("commands must be ordered by start time")
        if self.mpc.model_variant != self.model_variant:
            # the top-level switch wins
            self.mpc = self.mpc.model_copy(update={"model_variant": self.model_variant})
        if self.object is not None and self.object.start_in_hand and not self.phases[0].e:
            raise ValueError("an object that starts in the hand needs e = 1 in the first phase")
        uses_object = any(p.e for p in self.phases)
        if uses_object and self.object is None:
            raise ValueError("phases set e = 1 but the scenario has no object")
        return self

    # -- derived controller inputs ---------------------------------------------

    @property
    def gait_period(self) -> float:
        walks = [p for p in self.phases if isinstance(p, WalkSpec)]
        return walks[0].period if walks else 0.4

    def timeline(self) -> Timeline:
        phases: List[Phase] = []
        for spec in self.phases:
            if isinstance(spec, WalkSpec):
                phases.extend(
                    make_walk_gait(
                        spec.period,
                        spec.start,
                        spec.duration,
                        overlap=spec.overlap,
                        base=spec.flags(),
                        label=spec.label,
                    )
                )
            else:
                phases.append(Phase(start=spec.start, flags=spec.flags(), label=spec.label))
        phases.sort(key=lambda phase: phase.start)
        return Timeline.from_phases(phases, gait_period=self.gait_period)

    def plan(self) -> ControlPlan:
        return ControlPlan(
            timeline=self.timeline(),
            commands=tuple(spec.to_segment() for spec in self.commands),
            hand_waypoints=tuple(
                HandWaypoint(start=h.start, hand=h.hand, position=tuple(h.position), frame=h.frame)
                for h in sorted(self.hand_targets, key=lambda h: h.start)
            ),
            obj=self.object.params() if self.object is not None else None,
            gait_period=self.gait_period,
            k_gain=self.gait.k_gain,
            apex=self.gait.apex,
            ground_height=self.ground.height,
        )

    def with_overrides(self, **update) -> "Scenario":
        """Re-validated copy; used for ``--model``/``--duration``/``--seed`` and sweep points."""

        data = self.model_dump(mode="python")
        for key, value in update.items():
            if value is None:
                continue
            if key == "object_mass":
                if data.get("object") is None:
                    raise ScenarioError("scenario has no object to resize")
                data["object"]["mass"] = value
            else:
                data[key] = value
        if "model_variant" in update and update["model_variant"] is not None:
            data["mpc"]["model_variant"] = update["model_variant"]
        return Scenario.model_validate(data)


def load_scenario(path: Path | str) -> Scenario:
    source = Path(path)
    if not source.exists():
        raise ScenarioError(f"Scenario file not found: {source}")
    try:
        data = yaml.safe_load(source.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ScenarioError(f"Could not parse {source}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{source} does not contain a mapping")
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(f"Invalid scenario {source.name}: {exc}") from exc


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


class CheckResult(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""


class RunReport(BaseModel):
    schema_version: Literal[1] = 1
    scenario: str
    model_variant: Literal[1, 2]
    seed: int
    status: Literal["completed", "fallen", "aborted"]
    abort_reason: Optional[str] = None
    simulated_time: float
    ticks: int
    metrics: Dict[str, float] = Field(default_factory=dict)
    max_torque: Dict[str, float] = Field(default_factory=dict)
    checks: List[CheckResult] = Field(default_factory=list)
    trace_path: Optional[str] = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


class MetricComparison(BaseModel):
    metric: str
    a: float
    b: float
    delta: float
    winner: Literal["a", "b", "tie"]


class ComparisonTable(BaseModel):
    label_a: str
    label_b: str
    rows: List[MetricComparison]


class SweepPoint(BaseModel):
    mass: float
    stable: bool
    max_abs_pitch: Optional[float] = None
    com_error_max: Optional[float] = None
    status: str = "completed"


class SweepReport(BaseModel):
    scenario: str
    points: List[SweepPoint]
    max_stable_mass: Optional[float]
    monotone: bool
