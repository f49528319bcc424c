"""Closed-loop controller: horizon MPC on its own cadence feeding the high-rate whole-body tick."""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from control.contact_schedule import ContactFlags, Timeline, flags_at, horizon_flags, swing_progress
from control.mpc import Command, MpcConfig, MpcController, MpcSnapshot, make_reference
from control.swing_hand_pd import DEFAULT_APEX, DEFAULT_K_GAIN, SwingPlan, foot_placement, swing_trajectory
from control.whole_body_control import JointState, TaskTargets, WbcCommand, WbcConfig, WholeBodyController
from dynamics.errors import MpcInfeasibleError, WbcInfeasibleError
from dynamics.robot_model import GRAVITY, ActuatorLimits, BodyParams, KinematicTree, ObjectParams, combined_com
from dynamics.spatial_math import FloatArray, rot_z
from dynamics.srbd_dynamics import NU, NX, GRAVITY_VECTOR, static_equilibrium_input

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CommandSegment:
    start: float
    command: Command


@dataclass(frozen=True, eq=False)
class HandWaypoint:
    """Hand target from ``start`` on; body-frame targets are offsets from the CoM in the yaw frame."""

    start: float
    hand: int
    position: FloatArray
    frame: Literal["world", "body"] = "world"


@dataclass(frozen=True, eq=False)
class ControlPlan:
    timeline: Timeline
    commands: Tuple[CommandSegment, ...] = (CommandSegment(0.0, Command()),)
    hand_waypoints: Tuple[HandWaypoint, ...] = ()
    obj: Optional[ObjectParams] = None
    gait_period: float = 0.4
    k_gain: float = DEFAULT_K_GAIN
    apex: float = DEFAULT_APEX
    ground_height: float = 0.0

    def command_at(self, t: float) -> Tuple[int, CommandSegment]:
        starts = [segment.start for segment in self.commands]
        index = max(bisect.bisect_right(starts, t + 1e-9) - 1, 0)
        return index, self.commands[index]

    def hand_target(self, t: float, hand: int) -> Optional[HandWaypoint]:
        target = None
        for waypoint in self.hand_waypoints:
            if waypoint.hand == hand and waypoint.start <= t + 1e-9:
                target = waypoint
        return target


@dataclass(frozen=True, eq=False)
class ControlOutput:
    tau: FloatArray
    flags: ContactFlags
    snapshot: MpcSnapshot
    wbc: Optional[WbcCommand]
    mpc_ran: bool
    wbc_ran: bool
    mpc_flagged: bool
    wbc_flagged: bool


@dataclass
class _FootTrack:
    stance_position: FloatArray
    liftoff_position: Optional[FloatArray] = None
    target: Optional[FloatArray] = None


@dataclass
class _SegmentAnchor:
    index: int = -1
    start: float = 0.0
    xy: Optional[Tuple[float, float]] = None
    yaw: float = 0.0


@dataclass
class LoopStats:
    mpc_solves: int = 0
    mpc_infeasible: int = 0
    wbc_solves: int = 0
    wbc_infeasible: int = 0
    mpc_times: List[float] = field(default_factory=list)
    wbc_times: List[float] = field(default_factory=list)


class LocoManipulationController:
    """Runs the horizon controller every ``mpc_cfg.dt`` and the whole-body tick at ``wbc_rate_hz``.

    The last MPC result is held as an immutable snapshot between horizon
    solves; the last torque is held between whole-body ticks.
    """

    def __init__(
        self,
        body: BodyParams,
        tree: KinematicTree,
        limits: ActuatorLimits,
        plan: ControlPlan,
        mpc_cfg: Optional[MpcConfig] = None,
        wbc_cfg: Optional[WbcConfig] = None,
        wbc_rate_hz: float = 1000.0,
    ) -> None:
        self.body = body
        self.tree = tree
        self.plan = plan
        self.mpc_cfg = mpc_cfg or MpcConfig()
        self.mpc = MpcController(self.mpc_cfg, body.m_ub, body.I_body)
        self.wbc = WholeBodyController(tree, limits, wbc_cfg, foot_toe=body.foot_toe, foot_heel=body.foot_heel)
        self.wbc_period = 1.0 / wbc_rate_hz
        self.stats = LoopStats()
        self._next_mpc = 0.0
        self._next_wbc = 0.0
        self._tau = np.zeros(tree.actuated_indices.size)
        self._snapshot: Optional[MpcSnapshot] = None
        self._reference: Optional[FloatArray] = None
        self._feet: List[_FootTrack] = []
        self._previous_flags: Optional[ContactFlags] = None
        self._anchor = _SegmentAnchor()
        self._default_height: Optional[float] = None
        self._last_wbc: Optional[WbcCommand] = None

    # -- helpers ---------------------------------------------------------------

    @property
    def _object_mass(self) -> float:
        return self.plan.obj.mass if self.plan.obj is not None else 0.0

    def _hip_offset(self, foot: int) -> FloatArray:
        offsets = self.body.hip_offsets
        if foot >= len(offsets):
            return np.zeros(3)
        return np.array([0.0, offsets[foot][1], 0.0])

    def _command(self, t: float, measurement) -> Command:
        index, segment = self.plan.command_at(t)
        command = segment.command
        if index != self._anchor.index:
            feet = measurement.foot_positions
            xy = None
            if np.allclose(command.velocity, 0.0) and len(feet):
                xy = tuple(np.mean(feet[:, :2], axis=0))
            self._anchor = _SegmentAnchor(index=index, start=t, xy=xy, yaw=float(measurement.q[5]))
        if self._default_height is None:
            self._default_height = float(measurement.body.p_c[2])
        yaw = command.yaw if command.yaw is not None else self._anchor.yaw + command.yaw_rate * (t - self._anchor.start)
        return Command(
            velocity=command.velocity,
            yaw_rate=command.yaw_rate,
            height=command.height if command.height is not None else self._default_height,
            hold_xy=command.hold_xy if command.hold_xy is not None else self._anchor.xy,
            yaw=yaw,
        )

    def _state_vector(self, measurement, use_combined: bool) -> FloatArray:
        body = measurement.body
        p_c, v_c = body.p_c, body.p_c_dot
        if use_combined and measurement.object_position is not None:
            m_o = self._object_mass
            p_c = combined_com(p_c, self.body.m_ub, measurement.object_position, m_o)
            v_c = (self.body.m_ub * v_c + m_o * measurement.object_velocity) / (self.body.m_ub + m_o)
        return np.concatenate([body.theta, p_c, body.omega, v_c, GRAVITY_VECTOR])

    def _update_feet(self, t: float, flags: ContactFlags, measurement, v_des: FloatArray) -> None:
        feet = measurement.foot_positions
        if not self._feet:
            self._feet = [_FootTrack(stance_position=feet[n].copy()) for n in range(len(feet))]
        previous = self._previous_flags
        for n, track in enumerate(self._feet):
            stance = flags.stance(n)
            was_stance = previous.stance(n) if previous is not None else 1
            if was_stance and not stance:
                track.liftoff_position = feet[n].copy()
                track.target = self._foothold(n, measurement, v_des)
            elif stance and not was_stance:
                track.stance_position = feet[n].copy()
                track.liftoff_position = None
                track.target = None
        self._previous_flags = flags

    def _foothold(self, foot: int, measurement, v_des: FloatArray) -> FloatArray:
        body = measurement.body
        return foot_placement(
            body.p_c,
            body.p_c_dot,
            v_des,
            self.plan.gait_period,
            self.plan.k_gain,
            hip_offset=self._hip_offset(foot),
            yaw=float(measurement.q[5]),
            ground_height=self.plan.ground_height,
        )

    def _horizon_footholds(self, t: float, flags_seq: Sequence[ContactFlags], measurement) -> FloatArray:
        k = len(flags_seq)
        footholds = np.zeros((k, 2, 3))
        for n in range(min(2, len(self._feet))):
            track = self._feet[n]
            planned = track.target if track.target is not None else track.stance_position
            continuous = flags_at(self.plan.timeline, t).stance(n) == 1
            for i, step_flags in enumerate(flags_seq):
                continuous = continuous and step_flags.stance(n) == 1
                footholds[i, n] = track.stance_position if continuous else planned
        return footholds

    def _fallback_snapshot(self, t: float, measurement, flags: ContactFlags) -> MpcSnapshot:
        feet = measurement.foot_positions
        p_c = measurement.body.p_c
        r1 = feet[0] - p_c if len(feet) > 0 else np.zeros(3)
        r2 = feet[1] - p_c if len(feet) > 1 else np.zeros(3)
        U = static_equilibrium_input(r1, r2, self.body.m_ub, self._object_mass if flags.e else 0.0)
        return MpcSnapshot(time=t, u=U[:10], f_ext=U[10:NU], status="fallback", solve_time=0.0, iterations=0)

    def _resolve(self, waypoint: HandWaypoint, measurement) -> FloatArray:
        if waypoint.frame == "world":
            return np.asarray(waypoint.position, dtype=float)
        yaw = float(measurement.q[5])
        return measurement.body.p_c + rot_z(yaw) @ np.asarray(waypoint.position, dtype=float)

    # -- loop ------------------------------------------------------------------

    def _run_mpc(self, t: float, measurement, flags: ContactFlags, command: Command) -> bool:
        cfg = self.mpc_cfg
        use_combined = cfg.model_variant == 1 and measurement.attached
        x0 = self._state_vector(measurement, use_combined)
        flags_seq = horizon_flags(self.plan.timeline, t, cfg.dt, cfg.horizon)
        footholds = self._horizon_footholds(t, flags_seq, measurement)
        offset = np.zeros(3)
        if measurement.object_position is not None:
            offset = measurement.object_position - x0[3:6]
        obj = self.plan.obj
        try:
            snapshot = self.mpc.update(
                t,
                x0,
                command,
                flags_seq,
                footholds,
                object_offset=offset,
                object_mass=self._object_mass,
                object_inertia=obj.inertia if obj is not None else None,
            )
        except MpcInfeasibleError as exc:
            self.stats.mpc_infeasible += 1
            logger.warning("MPC infeasible, holding last command", extra={"time": round(t, 4), "classes": exc.classes})
            if self._snapshot is None:
                self._snapshot = self._fallback_snapshot(t, measurement, flags)
            self._snapshot = MpcSnapshot(
                time=t,
                u=self._snapshot.u,
                f_ext=self._snapshot.f_ext,
                status="infeasible",
                solve_time=0.0,
                iterations=0,
                feasible=False,
            )
            return True
        self.stats.mpc_solves += 1
        self.stats.mpc_times.append(snapshot.solve_time)
        self._snapshot = snapshot
        self._reference = make_reference(command, x0, cfg).x_ref[0]
        return False

    def _targets(self, t: float, flags: ContactFlags, measurement, command: Command) -> TaskTargets:
        reference = self._reference
        if reference is None:
            reference = np.zeros(NX)
            reference[3:6] = measurement.body.p_c
        base_position = np.concatenate([reference[3:6], reference[0:3]])
        base_velocity = np.concatenate([reference[9:12], reference[6:9]])

        feet = []
        for n, track in enumerate(self._feet):
            if flags.stance(n) or track.target is None or track.liftoff_position is None:
                feet.append((track.stance_position, np.zeros(3), np.zeros(3)))
                continue
            progress = swing_progress(self.plan.timeline, t, n)
            if progress is None or math.isinf(progress[2]):
                feet.append((track.liftoff_position, np.zeros(3), np.zeros(3)))
                continue
            phase, lift_off, touch_down = progress
            plan = SwingPlan(
                start=track.liftoff_position, target=track.target, apex=self.plan.apex, duration=touch_down - lift_off
            )
            feet.append(swing_trajectory(plan, phase))

        hands = []
        for m in range(len(self.tree.hands)):
            waypoint = self.plan.hand_target(t, m) if flags.hand(m) else None
            hands.append(None if waypoint is None else (self._resolve(waypoint, measurement), np.zeros(3)))

        f_ext = np.zeros(3)
        object_point = None
        if flags.e and measurement.attached:
            object_point = measurement.object_position
            if self.mpc_cfg.model_variant == 2 and self._snapshot is not None:
                f_ext = self._snapshot.f_ext
            else:
                f_ext = np.array([0.0, 0.0, self._object_mass * GRAVITY])
        return TaskTargets(
            base_position=base_position,
            base_velocity=base_velocity,
            feet=feet,
            hands=hands,
            object_point=object_point,
            f_ext=f_ext,
        )

    def tick(self, t: float, measurement) -> ControlOutput:
        flags = flags_at(self.plan.timeline, t)
        command = self._command(t, measurement)
        self._update_feet(t, flags, measurement, np.array([*command.velocity, 0.0]))

        mpc_ran = mpc_flagged = False
        if t + 1e-12 >= self._next_mpc:
            mpc_flagged = self._run_mpc(t, measurement, flags, command)
            mpc_ran = True
            self._next_mpc += self.mpc_cfg.dt
        if self._snapshot is None:
            self._snapshot = self._fallback_snapshot(t, measurement, flags)

        wbc_ran = wbc_flagged = False
        if t + 1e-12 >= self._next_wbc:
            wbc_ran = True
            self._next_wbc += self.wbc_period
            targets = self._targets(t, flags, measurement, command)
            state = JointState(q=measurement.q, qd=measurement.qd)
            wbc_flags = flags if measurement.attached else ContactFlags(flags.c1, flags.c2, 0, flags.h1, flags.h2)
            try:
                command_out = self.wbc.step(state, self._snapshot.u, wbc_flags, targets)
                self._tau = command_out.tau
                self._last_wbc = command_out
                self.stats.wbc_solves += 1
                self.stats.wbc_times.append(command_out.solve_time)
            except WbcInfeasibleError as exc:
                wbc_flagged = True
                self.stats.wbc_infeasible += 1
                logger.warning(
                    "WBC infeasible, holding last torque", extra={"time": round(t, 4), "classes": exc.classes}
                )
        return ControlOutput(
            tau=self._tau.copy(),
            flags=flags,
            snapshot=self._snapshot,
            wbc=self._last_wbc,
            mpc_ran=mpc_ran,
            wbc_ran=wbc_ran,
            mpc_flagged=mpc_flagged,
            wbc_flagged=wbc_flagged,
        )

    @property
    def reference_state(self) -> Optional[FloatArray]:
        """First reference state of the latest horizon, if one has been solved."""

        return None if self._reference is None else self._reference.copy()

    def solve_time_percentiles(self) -> Dict[str, float]:
        out: Dict[str, float] = {}
        for name, samples in (("mpc", self.stats.mpc_times), ("wbc", self.stats.wbc_times)):
            if samples:
                out[f"{name}_p50_ms"] = float(np.percentile(samples, 50) * 1e3)
                out[f"{name}_p95_ms"] = float(np.percentile(samples, 95) * 1e3)
            else:
                out[f"{name}_p50_ms"] = 0.0
                out[f"{name}_p95_ms"] = 0.0
        return out
