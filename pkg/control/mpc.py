"""Convex horizon controller over the contact schedule.

The single-rigid-body dynamics are linearized along the reference, discretized
per step and condensed so the decision vector only holds the ``k * 13`` inputs.
Foot inputs of swinging feet and the object support force are pinned by
equalities; stance feet get a friction pyramid and a vertical force window.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, field_validator

from control.contact_schedule import ContactFlags
from control.qp_solver import DEFAULT_MAX_ITER, DEFAULT_TOL, QpProblem, QpSolution, QpStatus, WarmStart, solve
from dynamics.errors import MpcInfeasibleError
from dynamics.robot_model import GRAVITY, shift_inertia
from dynamics.spatial_math import DEFAULT_PITCH_GUARD, FloatArray, as_vec3, rot_z
from dynamics.srbd_dynamics import (
    F1,
    F2,
    FEXT,
    GRAVITY_VECTOR,
    M1,
    M2,
    NU,
    NX,
    ContinuousSS,
    Discretization,
    build_A,
    build_B,
    discretize,
    static_equilibrium_input,
    world_inertia,
)

logger = logging.getLogger(__name__)

DEFAULT_Q = (1500.0, 2000.0, 1000.0, 1000.0, 1000.0, 1000.0, 1.0, 3.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
DEFAULT_R = (1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 5e-4, 5e-4, 5e-4, 5e-4, 0.0, 0.0, 0.0)

_FOOT_FORCE = (F1, F2)
_FOOT_MOMENT = (M1, M2)


class MpcConfig(BaseModel):
    """Horizon, weights and contact bounds of the horizon controller."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    dt: float = Field(default=0.03, gt=0.0)
    horizon: int = Field(default=20, ge=1)
    q_weights: Tuple[float, ...] = DEFAULT_Q
    r_weights: Tuple[float, ...] = DEFAULT_R
    mu: float = Field(default=0.5, gt=0.0)
    f_min: float = Field(default=10.0, gt=0.0)
    f_max: float = Field(default=500.0, gt=0.0)
    discretization: Discretization = Discretization.ZOH
    model_variant: Literal[1, 2] = 2
    # "static" penalizes U - U_ref with U_ref the per-step static balance; "zero" penalizes U itself
    input_reference: Literal["static", "zero"] = "static"
    pitch_guard: float = Field(default=DEFAULT_PITCH_GUARD, gt=0.0)
    qp_tol: float = Field(default=DEFAULT_TOL, gt=0.0)
    qp_max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=1)

    @field_validator("q_weights")
    @classmethod
    def _q_shape(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(value) != NX or min(value) < 0.0:
            raise ValueError(f"q_weights needs {NX} non-negative entries")
        return value

    @field_validator("r_weights")
    @classmethod
    def _r_shape(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(value) != NU or min(value) < 0.0:
            raise ValueError(f"r_weights needs {NU} non-negative entries")
        return value


@dataclass(frozen=True)
class Command:
    """Desired planar velocity (yaw frame), yaw rate and CoM height."""

    velocity: Tuple[float, float] = (0.0, 0.0)
    yaw_rate: float = 0.0
    height: Optional[float] = None
    hold_xy: Optional[Tuple[float, float]] = None
    yaw: Optional[float] = None


@dataclass(frozen=True, eq=False)
class ReferenceTrajectory:
    """``x_ref[i]`` is the desired state after step ``i`` (shape ``(k, 15)``)."""

    x_ref: FloatArray

    def __post_init__(self) -> None:
        if self.x_ref.ndim != 2 or self.x_ref.shape[1] != NX:
            raise ValueError(f"x_ref must have shape (k, {NX})")
        if not np.all(np.isfinite(self.x_ref)):
            raise ValueError("x_ref must be finite")
        if not np.allclose(self.x_ref[:, 12:15], GRAVITY_VECTOR):
            raise ValueError("the gravity block of x_ref must equal (0, 0, -9.81)")

    @property
    def k(self) -> int:
        return self.x_ref.shape[0]


@dataclass(frozen=True, eq=False)
class HorizonGeometry:
    """Per-step geometry of the horizon.

    ``footholds[i, n]`` is the world position of foot ``n`` during step ``i``;
    ``object_offset[i]`` is the world vector from the CoM to the object CoM.
    ``mass`` and ``inertia`` are the lumped body parameters per step.
    """

    footholds: FloatArray
    object_offset: FloatArray
    mass: FloatArray
    inertia: FloatArray
    object_mass: float = 0.0

    @classmethod
    def constant(
        cls,
        k: int,
        footholds: Sequence[ArrayLike],
        m_ub: float,
        I_body: ArrayLike,
        object_offset: ArrayLike = (0.0, 0.0, 0.0),
        object_mass: float = 0.0,
    ) -> "HorizonGeometry":
        feet = np.stack([as_vec3(p) for p in footholds])
        return cls(
            footholds=np.repeat(feet[None, :, :], k, axis=0),
            object_offset=np.repeat(as_vec3(object_offset)[None, :], k, axis=0),
            mass=np.full(k, float(m_ub)),
            inertia=np.repeat(np.asarray(I_body, dtype=float)[None, :, :], k, axis=0),
            object_mass=object_mass,
        )


@dataclass(eq=False)
class MpcProblem:
    qp: QpProblem
    Phi: FloatArray
    Gamma: FloatArray
    x0: FloatArray
    reference: ReferenceTrajectory

    def predict(self, U: FloatArray) -> FloatArray:
        return (self.Phi @ self.x0 + self.Gamma @ U.reshape(-1)).reshape(-1, NX)


@dataclass(eq=False)
class MpcSolution:
    U: FloatArray  # (k, 13)
    states: FloatArray  # (k, 15) predicted x_1..x_k
    status: QpStatus
    solve_time: float
    qp: QpSolution

    @property
    def u(self) -> FloatArray:
        return self.U[0, :10].copy()

    @property
    def f_ext(self) -> FloatArray:
        return self.U[0, FEXT].copy()


@dataclass(frozen=True, eq=False)
class MpcSnapshot:
    """First-step command published to the whole-body loop."""

    time: float
    u: FloatArray
    f_ext: FloatArray
    status: str
    solve_time: float
    iterations: int
    predicted_com: FloatArray = field(default_factory=lambda: np.zeros((0, 3)))
    feasible: bool = True


def make_reference(command: Command, x0: ArrayLike, cfg: MpcConfig) -> ReferenceTrajectory:
    """Constant-twist rollout from the current state toward the command."""

    x0 = np.asarray(x0, dtype=float)
    k, dt = cfg.horizon, cfg.dt
    psi0 = command.yaw if command.yaw is not None else float(x0[2])
    height = command.height if command.height is not None else float(x0[5])
    position = x0[3:6].copy()
    if command.hold_xy is not None:
        position[:2] = command.hold_xy
    local_velocity = np.array([command.velocity[0], command.velocity[1], 0.0])

    x_ref = np.zeros((k, NX))
    for i in range(k):
        psi = psi0 + command.yaw_rate * (i + 1) * dt
        velocity = rot_z(psi) @ local_velocity
        position = position + velocity * dt
        x_ref[i, 0:3] = (0.0, 0.0, psi)
        x_ref[i, 3:5] = position[:2]
        x_ref[i, 5] = height
        x_ref[i, 6:9] = (0.0, 0.0, command.yaw_rate)
        x_ref[i, 9:12] = velocity
        x_ref[i, 12:15] = GRAVITY_VECTOR
    return ReferenceTrajectory(x_ref=x_ref)


def combined_horizon(
    geometry: HorizonGeometry,
    flags: Sequence[ContactFlags],
    I_object: ArrayLike,
    yaw: Sequence[float],
) -> HorizonGeometry:
    """Merge the carried object into the body for steps where it is held.

    ``geometry`` must already be expressed about the combined CoM; the object
    offset is measured from that CoM.
    """

    m_o = geometry.object_mass
    mass = geometry.mass.copy()
    inertia = geometry.inertia.copy()
    I_o = np.asarray(I_object, dtype=float)
    for i, step_flags in enumerate(flags):
        if not step_flags.e or m_o <= 0.0:
            continue
        m_ub = geometry.mass[i]
        total = m_ub + m_o
        # body CoM sits opposite the object about the combined CoM
        r_o = geometry.object_offset[i]
        r_b = -m_o * r_o / m_ub
        Rz = rot_z(yaw[i])
        r_o_body = Rz.T @ r_o
        r_b_body = Rz.T @ r_b
        merged = shift_inertia(inertia[i], m_ub, r_b_body) + shift_inertia(I_o, m_o, r_o_body)
        inertia[i] = 0.5 * (merged + merged.T)
        mass[i] = total
    return HorizonGeometry(
        footholds=geometry.footholds,
        object_offset=np.zeros_like(geometry.object_offset),
        mass=mass,
        inertia=inertia,
        object_mass=0.0,
    )


def input_reference(
    x_lin: FloatArray,
    flags: Sequence[ContactFlags],
    geometry: HorizonGeometry,
    cfg: MpcConfig,
) -> FloatArray:
    """Per-step inputs that hold the body still at its linearization point, shape ``(k, 13)``.

    Double stance uses the roll-balanced split; single stance puts the whole
    weight on the stance foot and its pitch/yaw moments. Zero rows in flight.
    """

    k = len(flags)
    U_ref = np.zeros((k, NU))
    if cfg.input_reference == "zero":
        return U_ref
    for i, step_flags in enumerate(flags):
        p = x_lin[i, 3:6]
        r = [geometry.footholds[i, n] - p for n in range(2)]
        r_e = geometry.object_offset[i]
        m_o = geometry.object_mass if step_flags.e and cfg.model_variant == 2 else 0.0
        stance = [n for n in range(2) if step_flags.stance(n)]
        if len(stance) == 2:
            U_ref[i] = static_equilibrium_input(r[0], r[1], geometry.mass[i], m_o, r_e)
            continue
        f_ext = np.array([0.0, 0.0, m_o * GRAVITY])
        U_ref[i, FEXT] = f_ext
        if stance:
            n = stance[0]
            force = np.array([0.0, 0.0, (geometry.mass[i] + m_o) * GRAVITY])
            residual = np.cross(r[n], force) - np.cross(r_e, f_ext)
            U_ref[i, _FOOT_FORCE[n]] = force
            U_ref[i, _FOOT_MOMENT[n]] = -residual[1:]
    return U_ref


def build_qp(
    x0: ArrayLike,
    reference: ReferenceTrajectory,
    flags: Sequence[ContactFlags],
    geometry: HorizonGeometry,
    cfg: MpcConfig,
) -> MpcProblem:
    x0 = np.asarray(x0, dtype=float)
    k = reference.k
    if len(flags) != k or geometry.footholds.shape[0] != k or geometry.mass.shape[0] != k:
        raise ValueError("horizon lengths of reference, flags and geometry differ")

    x_lin = np.vstack([x0[None, :], reference.x_ref[:-1]])
    Phi = np.zeros((k * NX, NX))
    Gamma = np.zeros((k * NX, k * NU))
    for i in range(k):
        lin = x_lin[i]
        theta, p_lin = lin[0:3], lin[3:6]
        r1 = geometry.footholds[i, 0] - p_lin
        r2 = geometry.footholds[i, 1] - p_lin
        I_G = world_inertia(geometry.inertia[i], theta)
        ss = ContinuousSS(
            A=build_A(theta, cfg.pitch_guard),
            B=build_B(r1, r2, geometry.object_offset[i], I_G, geometry.mass[i], flags[i]),
        )
        A_d, B_d = discretize(ss, cfg.dt, cfg.discretization)
        rows = slice(i * NX, (i + 1) * NX)
        if i == 0:
            Phi[rows] = A_d
        else:
            prev = slice((i - 1) * NX, i * NX)
            Phi[rows] = A_d @ Phi[prev]
            Gamma[rows, : i * NU] = A_d @ Gamma[prev, : i * NU]
        Gamma[rows, i * NU : (i + 1) * NU] = B_d

    Q_bar = np.tile(np.asarray(cfg.q_weights), k)
    R_bar = np.tile(np.asarray(cfg.r_weights), k)
    X_ref = reference.x_ref.reshape(-1)
    GQ = Gamma.T * Q_bar
    P = 2.0 * (GQ @ Gamma + np.diag(R_bar))
    U_ref = input_reference(x_lin, flags, geometry, cfg).reshape(-1)
    q = 2.0 * GQ @ (Phi @ x0 - X_ref) - 2.0 * R_bar * U_ref

    A_in, lb, ub, labels_in = [], [], [], []
    A_eq, b_eq, labels_eq = [], [], []
    n = k * NU
    for i, step_flags in enumerate(flags):
        base = i * NU
        for foot in range(2):
            force = _FOOT_FORCE[foot]
            fx, fy, fz = base + force.start, base + force.start + 1, base + force.start + 2
            if step_flags.stance(foot):
                for axis in (fx, fy):
                    for sign in (1.0, -1.0):
                        row = np.zeros(n)
                        row[axis] = sign
                        row[fz] = -cfg.mu
                        A_in.append(row)
                        lb.append(-np.inf)
                        ub.append(0.0)
                        labels_in.append("friction")
                row = np.zeros(n)
                row[fz] = 1.0
                A_in.append(row)
                lb.append(cfg.f_min)
                ub.append(cfg.f_max)
                labels_in.append("fz_bounds")
            else:
                moment = _FOOT_MOMENT[foot]
                for column in list(range(force.start, force.stop)) + list(range(moment.start, moment.stop)):
                    row = np.zeros(n)
                    row[base + column] = 1.0
                    A_eq.append(row)
                    b_eq.append(0.0)
                    labels_eq.append("swing_pin")
        carried = step_flags.e and cfg.model_variant == 2
        target = np.array([0.0, 0.0, geometry.object_mass * GRAVITY]) if carried else np.zeros(3)
        for j in range(3):
            row = np.zeros(n)
            row[base + FEXT.start + j] = 1.0
            A_eq.append(row)
            b_eq.append(target[j])
            labels_eq.append("object_force")

    qp = QpProblem(
        P=P,
        q=q,
        A_eq=np.array(A_eq).reshape(-1, n),
        b_eq=np.array(b_eq),
        A_in=np.array(A_in).reshape(-1, n),
        lb=np.array(lb),
        ub=np.array(ub),
        labels_eq=labels_eq,
        labels_in=labels_in,
    )
    return MpcProblem(qp=qp, Phi=Phi, Gamma=Gamma, x0=x0, reference=reference)


def solve_mpc(
    problem: MpcProblem,
    cfg: MpcConfig,
    warm_start: Optional[WarmStart] = None,
) -> MpcSolution:
    started = time.perf_counter()
    result = solve(problem.qp, tol=cfg.qp_tol, max_iter=cfg.qp_max_iter, warm_start=warm_start)
    elapsed = time.perf_counter() - started
    if result.status is QpStatus.INFEASIBLE:
        classes = result.certificate.classes if result.certificate is not None else ()
        raise MpcInfeasibleError(classes, result)
    if result.status is QpStatus.MAX_ITER:
        logger.warning("MPC solve stopped before convergence", extra={"iterations": result.iterations})
    U = result.z.reshape(-1, NU)
    return MpcSolution(U=U, states=problem.predict(U), status=result.status, solve_time=elapsed, qp=result)


def constraint_margin(solution: MpcSolution, flags: Sequence[ContactFlags], cfg: MpcConfig) -> float:
    """Smallest slack over the friction and vertical-force rows (negative means violated)."""

    margin = np.inf
    for i, step_flags in enumerate(flags):
        for foot in range(2):
            if not step_flags.stance(foot):
                continue
            fx, fy, fz = solution.U[i, _FOOT_FORCE[foot]]
            margin = min(
                margin,
                cfg.mu * fz - abs(fx),
                cfg.mu * fz - abs(fy),
                fz - cfg.f_min,
                cfg.f_max - fz,
            )
    return float(margin)


class MpcController:
    """Stateful wrapper that carries the warm start between ticks."""

    def __init__(self, cfg: MpcConfig, m_ub: float, I_body: ArrayLike) -> None:
        self.cfg = cfg
        self.m_ub = float(m_ub)
        self.I_body = np.asarray(I_body, dtype=float)
        self._warm: Optional[WarmStart] = None
        self.last_solution: Optional[MpcSolution] = None

    def reset(self) -> None:
        self._warm = None
        self.last_solution = None

    def update(
        self,
        t: float,
        x0: ArrayLike,
        command: Command,
        flags: Sequence[ContactFlags],
        footholds: FloatArray,
        object_offset: ArrayLike = (0.0, 0.0, 0.0),
        object_mass: float = 0.0,
        object_inertia: Optional[ArrayLike] = None,
    ) -> MpcSnapshot:
        """Solve one horizon; raises ``MpcInfeasibleError`` when no input satisfies the constraints.

        ``x0`` carries the robot CoM for the external-force model and the
        combined CoM for the merged-body model; ``object_offset`` is measured
        from that point.
        """

        cfg = self.cfg
        x0 = np.asarray(x0, dtype=float)
        reference = make_reference(command, x0, cfg)
        offset = as_vec3(object_offset)
        geometry = HorizonGeometry(
            footholds=np.asarray(footholds, dtype=float),
            object_offset=np.repeat(offset[None, :], cfg.horizon, axis=0),
            mass=np.full(cfg.horizon, self.m_ub),
            inertia=np.repeat(self.I_body[None, :, :], cfg.horizon, axis=0),
            object_mass=object_mass,
        )
        if cfg.model_variant == 1:
            I_o = np.zeros((3, 3)) if object_inertia is None else object_inertia
            geometry = combined_horizon(geometry, flags, I_o, reference.x_ref[:, 2])
        problem = build_qp(x0, reference, flags, geometry, cfg)
        try:
            solution = solve_mpc(problem, cfg, self._warm)
        except MpcInfeasibleError:
            self._warm = None
            raise
        self._warm = solution.qp.warm_start() if solution.status is QpStatus.OPTIMAL else None
        self.last_solution = solution
        return MpcSnapshot(
            time=t,
            u=solution.u,
            f_ext=solution.f_ext,
            status=solution.status.value,
            solve_time=solution.solve_time,
            iterations=solution.qp.iterations,
            predicted_com=solution.states[:, 3:6].copy(),
            feasible=True,
        )


def robot_com_from_combined(p_combined: ArrayLike, m_ub: float, p_object: ArrayLike, m_o: float) -> FloatArray:
    """Inverse of ``combined_com`` for the robot-only CoM."""

    if m_o <= 0.0:
        return as_vec3(p_combined)
    return ((m_ub + m_o) * as_vec3(p_combined) - m_o * as_vec3(p_object)) / m_ub

