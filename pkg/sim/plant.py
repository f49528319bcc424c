"""Articulated-body plant with penalty ground contact and a graspable object.

The robot is integrated in generalized coordinates with the same tree
algorithms the controllers use. While the object is held it is welded to the
hand link (a merged tree), otherwise it is either fixed in place (waiting to
be picked up) or flying freely under gravity with a single ground contact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, PositiveFloat
from scipy.linalg import cho_factor, cho_solve

from dynamics import rigid_body
from dynamics.errors import AttachError, SimulationBlowUpError
from dynamics.robot_model import ActuatorLimits, KinematicTree, ObjectParams
from dynamics.spatial_math import FloatArray, as_vec3, euler_rate_matrix, matrix_exponential, skew
from dynamics.srbd_dynamics import RigidBodyState

logger = logging.getLogger(__name__)

DEFAULT_ATTACH_THRESHOLD = 0.05
_VELOCITY_LIMIT = 1e3
_MIDPOINT_ITERATIONS = 30

ContactKey = Tuple[int, int]  # (foot, 0 toe / 1 heel)


class GroundModel(BaseModel):
    """Spring-damper ground with a stiction anchor for tangential forces."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    stiffness: PositiveFloat = 2e5
    damping: PositiveFloat = 400.0
    mu: PositiveFloat = 0.8
    tangential_stiffness: PositiveFloat = 1e5
    tangential_damping: PositiveFloat = 300.0
    height: float = 0.0


class Integrator(str, Enum):
    SEMI_IMPLICIT_EULER = "semi_implicit_euler"
    MIDPOINT = "midpoint"


class ObjectMode(str, Enum):
    FIXED = "fixed"
    ATTACHED = "attached"
    FREE = "free"


@dataclass(frozen=True, eq=False)
class ObjectState:
    position: FloatArray
    rotation: FloatArray = field(default_factory=lambda: np.eye(3))
    velocity: FloatArray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: FloatArray = field(default_factory=lambda: np.zeros(3))
    mode: ObjectMode = ObjectMode.FIXED
    anchor: Optional[FloatArray] = None


@dataclass(frozen=True, eq=False)
class Grasp:
    """Object pose in the hand link frame while attached."""

    link: int
    com: FloatArray
    rotation: FloatArray


@dataclass(frozen=True, eq=False)
class PlantState:
    q: FloatArray
    qd: FloatArray
    time: float = 0.0
    object: Optional[ObjectState] = None
    grasp: Optional[Grasp] = None
    anchors: Dict[ContactKey, FloatArray] = field(default_factory=dict)

    @property
    def attached(self) -> bool:
        return self.grasp is not None


@dataclass(frozen=True, eq=False)
class Measurement:
    body: RigidBodyState
    q: FloatArray
    qd: FloatArray
    foot_positions: FloatArray
    hand_positions: FloatArray
    object_position: Optional[FloatArray]
    object_rotation: Optional[FloatArray]
    object_velocity: Optional[FloatArray]
    attached: bool


@dataclass(frozen=True, eq=False)
class ContactReport:
    normal: FloatArray
    tangential: FloatArray
    penetration: FloatArray


def _rotation_step(omega: FloatArray, dt: float) -> FloatArray:
    return matrix_exponential(skew(omega), dt)


class Plant:
    def __init__(
        self,
        tree: KinematicTree,
        limits: ActuatorLimits,
        *,
        ground: Optional[GroundModel] = None,
        obj: Optional[ObjectParams] = None,
        dt: float = 5e-4,
        integrator: Integrator = Integrator.SEMI_IMPLICIT_EULER,
        gravity: bool = True,
        attach_threshold: float = DEFAULT_ATTACH_THRESHOLD,
    ) -> None:
        if dt <= 0.0 or dt > 1e-3:
            raise ValueError("plant dt must lie in (0, 1 ms]")
        self.tree = tree if gravity else replace(tree, gravity=np.zeros(3))
        self.limits = limits
        self.ground = ground or GroundModel()
        self.obj = obj
        self.dt = dt
        self.integrator = Integrator(integrator)
        self.attach_threshold = attach_threshold
        self._merged: Dict[Tuple[int, bytes], KinematicTree] = {}
        self.last_contact: Optional[ContactReport] = None

    # -- state construction --------------------------------------------------

    def initial_state(
        self,
        q: Optional[ArrayLike] = None,
        qd: Optional[ArrayLike] = None,
        object_position: Optional[ArrayLike] = None,
    ) -> PlantState:
        q0 = np.array(q if q is not None else self.tree.nominal_q, dtype=float)
        qd0 = np.zeros(self.tree.nq) if qd is None else np.asarray(qd, dtype=float)
        obj = None
        if self.obj is not None and object_position is not None:
            obj = ObjectState(position=as_vec3(object_position))
        return PlantState(q=q0, qd=qd0, object=obj)

    def standing_height(self, q: ArrayLike) -> float:
        """Base height that puts the lowest sole point at the ground with a small preload."""

        q = np.asarray(q, dtype=float).copy()
        kin = rigid_body.forward_kinematics(self.tree, q)
        lowest = min(
            float(kin.point(foot.link, point)[2]) for foot in self.tree.feet for point in foot.contact_points()
        )
        weight = self.tree.total_mass * float(np.linalg.norm(self.tree.gravity))
        preload = weight / (2 * len(self.tree.feet) * self.ground.stiffness) if self.tree.feet else 0.0
        return float(q[2] - (lowest - self.ground.height) - preload)

    # -- trees ---------------------------------------------------------------

    def active_tree(self, state: PlantState) -> KinematicTree:
        if state.grasp is None or self.obj is None:
            return self.tree
        key = (state.grasp.link, state.grasp.com.tobytes() + state.grasp.rotation.tobytes())
        merged = self._merged.get(key)
        if merged is None:
            inertia_local = state.grasp.rotation @ self.obj.inertia @ state.grasp.rotation.T
            merged = self.tree.with_payload(state.grasp.link, self.obj.mass, state.grasp.com, inertia_local)
            self._merged = {key: merged}
        return merged

    # -- contact -------------------------------------------------------------

    def _ground_forces(
        self, kin: rigid_body.TreeKinematics, anchors: Dict[ContactKey, FloatArray]
    ) -> Tuple[List[rigid_body.PointForce], Dict[ContactKey, FloatArray], ContactReport]:
        g = self.ground
        forces: List[rigid_body.PointForce] = []
        new_anchors: Dict[ContactKey, FloatArray] = {}
        normals, tangentials, depths = [], [], []
        for f, foot in enumerate(self.tree.feet):
            for c, local in enumerate(foot.contact_points()):
                point = kin.point(foot.link, local)
                velocity = kin.point_velocity(foot.link, point)
                depth = g.height - point[2]
                if depth <= 0.0:
                    normals.append(0.0)
                    tangentials.append(0.0)
                    depths.append(0.0)
                    continue
                normal = max(g.stiffness * depth - g.damping * velocity[2], 0.0)
                anchor = anchors.get((f, c))
                if anchor is None:
                    anchor = point[:2].copy()
                tangential = -g.tangential_stiffness * (point[:2] - anchor) - g.tangential_damping * velocity[:2]
                limit = g.mu * normal
                magnitude = float(np.linalg.norm(tangential))
                if magnitude > limit:
                    tangential = tangential * (limit / magnitude) if magnitude > 0.0 else tangential
                    # slide the anchor so the spring alone carries the saturated force
                    anchor = point[:2] + tangential / g.tangential_stiffness
                new_anchors[(f, c)] = anchor
                force = np.array([tangential[0], tangential[1], normal])
                forces.append((foot.link, point, force))
                normals.append(normal)
                tangentials.append(float(np.linalg.norm(tangential)))
                depths.append(depth)
        report = ContactReport(normal=np.array(normals), tangential=np.array(tangentials), penetration=np.array(depths))
        return forces, new_anchors, report

    # -- dynamics ------------------------------------------------------------

    def _actuation(self, state: PlantState, tau: ArrayLike) -> FloatArray:
        tree = self.tree
        act = tree.actuated_indices
        tau = np.asarray(tau, dtype=float).reshape(-1)
        if tau.size != act.size:
            raise ValueError(f"tau must have {act.size} entries, got {tau.size}")
        tau = self.limits.clip(tau)
        # no torque that pushes a joint further past its speed limit
        speed = state.qd[act]
        saturated = (np.abs(speed) >= self.limits.qd_max) & (speed * tau > 0.0)
        tau = np.where(saturated, 0.0, tau)
        generalized = np.zeros(tree.nq)
        generalized[act] = tau
        return generalized

    def _accelerations(
        self,
        tree: KinematicTree,
        q: FloatArray,
        qd: FloatArray,
        generalized: FloatArray,
        anchors: Dict[ContactKey, FloatArray],
    ) -> Tuple[FloatArray, Dict[ContactKey, FloatArray], ContactReport]:
        kin = rigid_body.forward_kinematics(tree, q, qd)
        external, new_anchors, report = self._ground_forces(kin, anchors)
        M = rigid_body.mass_matrix(tree, kin)
        bias = rigid_body.inverse_dynamics(tree, q, qd, np.zeros(tree.nq), external=external, kin=kin)
        return cho_solve(cho_factor(M), generalized - bias), new_anchors, report

    def step(self, state: PlantState, tau: ArrayLike, dt: Optional[float] = None) -> PlantState:
        dt = self.dt if dt is None else dt
        if dt <= 0.0 or dt > 1e-3:
            raise ValueError("plant dt must lie in (0, 1 ms]")
        tree = self.active_tree(state)
        generalized = self._actuation(state, tau)

        if self.integrator is Integrator.SEMI_IMPLICIT_EULER:
            qdd, anchors, report = self._accelerations(tree, state.q, state.qd, generalized, state.anchors)
            qd = state.qd + dt * qdd
            q = state.q + dt * qd
        else:
            q, qd, anchors, report = self._midpoint(tree, state, generalized, dt)

        t = state.time + dt
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))) or np.max(np.abs(qd)) > _VELOCITY_LIMIT:
            raise SimulationBlowUpError(t)
        self.last_contact = report
        return replace(state, q=q, qd=qd, time=t, anchors=anchors, object=self._step_object(state, dt))

    def _midpoint(
        self, tree: KinematicTree, state: PlantState, generalized: FloatArray, dt: float
    ) -> Tuple[FloatArray, FloatArray, Dict[ContactKey, FloatArray], ContactReport]:
        q0, qd0 = state.q, state.qd
        qd1 = qd0.copy()
        anchors, report = state.anchors, None
        for _ in range(_MIDPOINT_ITERATIONS):
            qd_mid = 0.5 * (qd0 + qd1)
            q_mid = q0 + 0.5 * dt * qd_mid
            qdd, anchors, report = self._accelerations(tree, q_mid, qd_mid, generalized, state.anchors)
            updated = qd0 + dt * qdd
            change = float(np.max(np.abs(updated - qd1)))
            qd1 = updated
            if change < 1e-13 * (1.0 + float(np.max(np.abs(qd1)))):
                break
        q1 = q0 + dt * 0.5 * (qd0 + qd1)
        return q1, qd1, anchors, report

    def _step_object(self, state: PlantState, dt: float) -> Optional[ObjectState]:
        obj = state.object
        if obj is None or obj.mode is not ObjectMode.FREE or self.obj is None:
            return obj
        g = self.tree.gravity
        ground = self.ground
        bottom = obj.position[2] - self.obj.half_height
        depth = ground.height - bottom
        if depth <= 0.0:
            # exact constant-acceleration flight
            position = obj.position + obj.velocity * dt + 0.5 * g * dt**2
            velocity = obj.velocity + g * dt
            anchor = None
        else:
            normal = max(ground.stiffness * depth - ground.damping * obj.velocity[2], 0.0)
            point = np.array([obj.position[0], obj.position[1], bottom])
            anchor = obj.anchor if obj.anchor is not None else point[:2].copy()
            tangential = -ground.tangential_stiffness * (point[:2] - anchor)
            tangential -= ground.tangential_damping * obj.velocity[:2]
            magnitude = float(np.linalg.norm(tangential))
            if magnitude > ground.mu * normal and magnitude > 0.0:
                tangential *= ground.mu * normal / magnitude
                anchor = point[:2] + tangential / ground.tangential_stiffness
            force = np.array([tangential[0], tangential[1], normal])
            velocity = obj.velocity + dt * (g + force / self.obj.mass)
            position = obj.position + dt * velocity
        I_world = obj.rotation @ self.obj.inertia @ obj.rotation.T
        momentum = I_world @ obj.angular_velocity
        rotation = _rotation_step(obj.angular_velocity, dt) @ obj.rotation
        I_next = rotation @ self.obj.inertia @ rotation.T
        omega = np.linalg.lstsq(I_next, momentum, rcond=None)[0] if np.any(self.obj.inertia) else obj.angular_velocity
        return replace(
            obj, position=position, velocity=velocity, rotation=rotation, angular_velocity=omega, anchor=anchor
        )

    # -- object events ---------------------------------------------------------

    def hand_distance(self, state: PlantState, hand: int = 0) -> float:
        if state.object is None:
            return np.inf
        kin = rigid_body.forward_kinematics(self.tree, state.q)
        frame = self.tree.hands[hand]
        return float(np.linalg.norm(kin.point(frame.link, frame.point) - self.object_pose(state)[0]))

    def attach_object(self, state: PlantState, hand: int = 0, threshold: Optional[float] = None) -> PlantState:
        """Weld the object to the hand link, conserving generalized momentum."""

        if self.obj is None or state.object is None:
            raise AttachError("no object is bound to this plant")
        if state.attached:
            return state
        threshold = self.attach_threshold if threshold is None else threshold
        distance = self.hand_distance(state, hand)
        if distance >= threshold:
            raise AttachError(f"object is {distance:.3f} m from hand {hand}, threshold {threshold:.3f} m")

        link = self.tree.hands[hand].link
        kin = rigid_body.forward_kinematics(self.tree, state.q, state.qd)
        R_link, origin = kin.rotations[link], kin.origins[link]
        obj = state.object
        grasp = Grasp(link=link, com=R_link.T @ (obj.position - origin), rotation=R_link.T @ obj.rotation)

        M = rigid_body.mass_matrix(self.tree, kin)
        J_lin = rigid_body.point_jacobian(self.tree, kin, link, obj.position)
        J_ang = rigid_body.angular_jacobian(self.tree, kin, link)
        I_world = obj.rotation @ self.obj.inertia @ obj.rotation.T
        momentum = M @ state.qd + J_lin.T @ (self.obj.mass * obj.velocity) + J_ang.T @ (I_world @ obj.angular_velocity)

        attached = replace(state, grasp=grasp, object=replace(obj, mode=ObjectMode.ATTACHED, anchor=None))
        merged = self.active_tree(attached)
        M_merged = rigid_body.mass_matrix(merged, rigid_body.forward_kinematics(merged, state.q))
        qd = cho_solve(cho_factor(M_merged), momentum)
        logger.info("Object attached", extra={"time": round(state.time, 4), "distance": round(distance, 4)})
        return replace(attached, qd=qd)

    def detach_object(self, state: PlantState) -> PlantState:
        """Release the object with the velocity of its grasp point."""

        if not state.attached or state.object is None:
            return state
        grasp = state.grasp
        kin = rigid_body.forward_kinematics(self.tree, state.q, state.qd)
        R_link, origin = kin.rotations[grasp.link], kin.origins[grasp.link]
        position = origin + R_link @ grasp.com
        released = ObjectState(
            position=position,
            rotation=R_link @ grasp.rotation,
            velocity=kin.point_velocity(grasp.link, position),
            angular_velocity=kin.angular_velocity(grasp.link),
            mode=ObjectMode.FREE,
        )
        logger.info(
            "Object released",
            extra={"time": round(state.time, 4), "speed": round(float(np.linalg.norm(released.velocity)), 4)},
        )
        return replace(state, grasp=None, object=released)

    def object_pose(self, state: PlantState) -> Tuple[FloatArray, FloatArray]:
        obj = state.object
        if obj is None:
            raise ValueError("no object in this state")
        if state.grasp is None:
            return obj.position.copy(), obj.rotation.copy()
        kin = rigid_body.forward_kinematics(self.tree, state.q)
        R_link, origin = kin.rotations[state.grasp.link], kin.origins[state.grasp.link]
        return origin + R_link @ state.grasp.com, R_link @ state.grasp.rotation

    # -- feedback --------------------------------------------------------------

    def measure(self, state: PlantState) -> Measurement:
        """Exact state feedback; the body CoM excludes a held object."""

        tree = self.tree
        kin = rigid_body.forward_kinematics(tree, state.q, state.qd)
        com = rigid_body.center_of_mass(tree, kin)
        com_velocity = rigid_body.com_jacobian(tree, kin) @ state.qd
        if tree.floating_base:
            theta = state.q[3:6].copy()
            omega = euler_rate_matrix(theta, guard=1e-6) @ state.qd[3:6]
        else:
            theta, omega = np.zeros(3), np.zeros(3)
        feet = np.array([kin.point(f.link, f.sole) for f in tree.feet]).reshape(-1, 3)
        hands = np.array([kin.point(h.link, h.point) for h in tree.hands]).reshape(-1, 3)
        position = rotation = velocity = None
        if state.object is not None:
            position, rotation = self.object_pose(state)
            velocity = self.object_velocity(state)
        return Measurement(
            body=RigidBodyState(theta=theta, p_c=com, omega=omega, p_c_dot=com_velocity),
            q=state.q.copy(),
            qd=state.qd.copy(),
            foot_positions=feet,
            hand_positions=hands,
            object_position=position,
            object_rotation=rotation,
            object_velocity=velocity,
            attached=state.attached,
        )

    def total_energy(self, state: PlantState) -> float:
        tree = self.active_tree(state)
        kin = rigid_body.forward_kinematics(tree, state.q, state.qd)
        return rigid_body.kinetic_energy(tree, kin, state.qd) + rigid_body.potential_energy(tree, kin)

    def object_velocity(self, state: PlantState) -> FloatArray:
        if state.object is None:
            raise ValueError("no object in this state")
        if state.grasp is None:
            return state.object.velocity.copy()
        kin = rigid_body.forward_kinematics(self.tree, state.q, state.qd)
        position, _ = self.object_pose(state)
        return kin.point_velocity(state.grasp.link, position)

    def system_momentum(self, state: PlantState) -> FloatArray:
        """Total linear momentum of robot and object."""

        tree = self.active_tree(state)
        kin = rigid_body.forward_kinematics(tree, state.q, state.qd)
        momentum = tree.total_mass * (rigid_body.com_jacobian(tree, kin) @ state.qd)
        if state.object is not None and not state.attached and self.obj is not None:
            momentum = momentum + self.obj.mass * state.object.velocity
        return momentum
