"""Whole-body control: joint-space dynamics, prioritized task accelerations and the torque QP.

Generalized coordinates follow ``dynamics.robot_model``: six floating-base
coordinates ``[p; roll, pitch, yaw]`` followed by the actuated joints. The
equation of motion is ``M qdd + C + g = S^T tau + tau_f``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat

from control.contact_schedule import ContactFlags
from control.qp_solver import QpProblem, QpSolution, QpStatus, solve
from control.swing_hand_pd import PdGains, hand_force, swing_force
from dynamics import rigid_body
from dynamics.errors import WbcInfeasibleError
from dynamics.robot_model import BASE_DOF, ActuatorLimits, KinematicTree
from dynamics.spatial_math import FloatArray, as_vec3
from dynamics.srbd_dynamics import MOMENT_SELECTION

logger = logging.getLogger(__name__)

DEFAULT_KP_WBC = (200.0, 200.0, 500.0, 1000.0, 1500.0, 1000.0)
DEFAULT_KD_WBC = (20.0, 20.0, 30.0, 30.0, 30.0, 30.0)
DEFAULT_DAMPING = 1e-4
DEFAULT_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class JointState:
    q: FloatArray
    qd: FloatArray

    def __post_init__(self) -> None:
        if self.q.shape != self.qd.shape or self.q.ndim != 1:
            raise ValueError("q and qd must be vectors of equal length")

    @property
    def base_position(self) -> FloatArray:
        return self.q[0:3]

    @property
    def euler(self) -> FloatArray:
        return self.q[3:6]


@dataclass(frozen=True, eq=False)
class DynamicsTerms:
    """Joint-space terms and task Jacobians at one configuration.

    ``J_c`` stacks ``[J_lin(foot 1); J_lin(foot 2); L^T J_ang(foot 1); L^T J_ang(foot 2)]``
    to match ``u = [F1; F2; M1; M2]``. ``J_pd`` stacks the hand points then the
    foot soles. ``J_e`` is the Jacobian of the carried object point.
    """

    M: FloatArray
    C: FloatArray
    g_vec: FloatArray
    J_c: FloatArray
    J_pd: FloatArray
    J_e: FloatArray
    J_com: FloatArray
    contact_bias: FloatArray
    pd_bias: FloatArray
    com_bias: FloatArray
    com: FloatArray
    com_velocity: FloatArray
    foot_positions: FloatArray
    foot_velocities: FloatArray
    hand_positions: FloatArray
    hand_velocities: FloatArray
    floating_base: bool
    actuated: np.ndarray

    @property
    def nq(self) -> int:
        return self.M.shape[0]

    @property
    def n_feet(self) -> int:
        return self.foot_positions.shape[0]

    @property
    def n_hands(self) -> int:
        return self.hand_positions.shape[0]

    @property
    def h(self) -> FloatArray:
        return self.C + self.g_vec


class WbcConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    h_base: NonNegativeFloat = 1.0
    h_joint: NonNegativeFloat = 0.1
    k_weights: Tuple[NonNegativeFloat, ...] = (1e-3,) * 10
    kp_wbc: Tuple[NonNegativeFloat, ...] = DEFAULT_KP_WBC
    kd_wbc: Tuple[NonNegativeFloat, ...] = DEFAULT_KD_WBC
    swing_gains: PdGains = PdGains(kp=(500.0, 500.0, 500.0), kd=(30.0, 30.0, 30.0))
    hand_gains: PdGains = PdGains(kp=(300.0, 300.0, 300.0), kd=(20.0, 20.0, 20.0))
    posture_kp: NonNegativeFloat = 100.0
    posture_kd: NonNegativeFloat = 20.0
    mu: float = Field(default=0.5, gt=0.0)
    f_max: float = Field(default=500.0, gt=0.0)
    damping: float = Field(default=DEFAULT_DAMPING, gt=0.0)
    qp_tol: float = Field(default=1e-8, gt=0.0)
    qp_max_iter: int = Field(default=200, ge=1)


@dataclass(frozen=True, eq=False)
class Task:
    """``J qdd + bias = acceleration``."""

    name: str
    J: FloatArray
    acceleration: FloatArray
    bias: FloatArray


@dataclass(frozen=True, eq=False)
class TaskTargets:
    """Per-tick references for the whole-body tick.

    Foot targets are ``(position, velocity, acceleration)``; hand targets are
    ``(position, velocity)``. ``None`` leaves the limb at its current position.
    """

    base_position: FloatArray
    base_velocity: FloatArray
    feet: Sequence[Optional[Tuple[FloatArray, FloatArray, FloatArray]]] = ()
    hands: Sequence[Optional[Tuple[FloatArray, FloatArray]]] = ()
    object_point: Optional[FloatArray] = None
    f_ext: FloatArray = field(default_factory=lambda: np.zeros(3))


@dataclass(eq=False)
class WbcSolution:
    delta_qdd: FloatArray
    delta_u: FloatArray
    tau: FloatArray
    status: QpStatus
    base_residual: FloatArray
    qp: QpSolution


@dataclass(frozen=True, eq=False)
class WbcCommand:
    tau: FloatArray
    qdd_cmd: FloatArray
    delta_u_norm: float
    status: str
    solve_time: float
    f_pd: FloatArray


# ---------------------------------------------------------------------------
# Dynamics terms
# ---------------------------------------------------------------------------


def compute_dynamics(
    tree: KinematicTree,
    q: ArrayLike,
    qd: ArrayLike,
    *,
    object_link: Optional[int] = None,
    object_point: Optional[ArrayLike] = None,
) -> DynamicsTerms:
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    n = tree.nq
    kin = rigid_body.forward_kinematics(tree, q, qd)
    M = rigid_body.mass_matrix(tree, kin)
    zeros = np.zeros(n)
    C = rigid_body.inverse_dynamics(tree, q, qd, zeros, gravity=False, kin=kin)
    g_vec = rigid_body.inverse_dynamics(tree, q, zeros, zeros, kin=rigid_body.forward_kinematics(tree, q, zeros))
    bias = rigid_body.bias_accelerations(tree, kin, qd)

    lin_rows, ang_rows, lin_bias, ang_bias = [], [], [], []
    foot_positions, foot_velocities = [], []
    for foot in tree.feet:
        point = kin.point(foot.link, foot.sole)
        foot_positions.append(point)
        foot_velocities.append(kin.point_velocity(foot.link, point))
        lin_rows.append(rigid_body.point_jacobian(tree, kin, foot.link, point))
        lin_bias.append(rigid_body.point_bias_acceleration(kin, bias, foot.link, point))
        ang_rows.append(MOMENT_SELECTION.T @ rigid_body.angular_jacobian(tree, kin, foot.link))
        ang_bias.append(MOMENT_SELECTION.T @ bias[foot.link][:3])
    J_c = np.vstack(lin_rows + ang_rows) if tree.feet else np.zeros((0, n))
    contact_bias = np.concatenate(lin_bias + ang_bias) if tree.feet else np.zeros(0)

    hand_rows, hand_bias, hand_positions, hand_velocities = [], [], [], []
    for hand in tree.hands:
        point = kin.point(hand.link, hand.point)
        hand_positions.append(point)
        hand_velocities.append(kin.point_velocity(hand.link, point))
        hand_rows.append(rigid_body.point_jacobian(tree, kin, hand.link, point))
        hand_bias.append(rigid_body.point_bias_acceleration(kin, bias, hand.link, point))
    pd_rows = hand_rows + lin_rows[: len(tree.feet)]
    pd_bias = hand_bias + lin_bias[: len(tree.feet)]

    if object_point is not None:
        link = object_link if object_link is not None else (tree.hands[0].link if tree.hands else n - 1)
        J_e = rigid_body.point_jacobian(tree, kin, link, as_vec3(object_point))
    else:
        J_e = np.zeros((3, n))

    com = rigid_body.center_of_mass(tree, kin)
    J_com = rigid_body.com_jacobian(tree, kin)
    return DynamicsTerms(
        M=M,
        C=C,
        g_vec=g_vec,
        J_c=J_c,
        J_pd=np.vstack(pd_rows) if pd_rows else np.zeros((0, n)),
        J_e=J_e,
        J_com=J_com,
        contact_bias=contact_bias,
        pd_bias=np.concatenate(pd_bias) if pd_bias else np.zeros(0),
        com_bias=rigid_body.com_bias_acceleration(tree, kin, bias),
        com=com,
        com_velocity=J_com @ qd,
        foot_positions=np.array(foot_positions).reshape(-1, 3),
        foot_velocities=np.array(foot_velocities).reshape(-1, 3),
        hand_positions=np.array(hand_positions).reshape(-1, 3),
        hand_velocities=np.array(hand_velocities).reshape(-1, 3),
        floating_base=tree.floating_base,
        actuated=tree.actuated_indices,
    )


def _contact_gate(flags: ContactFlags, n_feet: int) -> FloatArray:
    """Per-row stance gate for ``u = [F1; F2; M1; M2]``."""

    stance = [flags.stance(n) for n in range(n_feet)]
    return np.array([s for s in stance for _ in range(3)] + [s for s in stance for _ in range(2)], dtype=float)


def _pd_gate(flags: ContactFlags, n_hands: int, n_feet: int) -> FloatArray:
    # each swing force is gated by the other foot's stance flag
    hands = [flags.hand(m) for m in range(n_hands)]
    if n_feet == 2:
        feet = [flags.c2, flags.c1]
    else:
        feet = [1 - flags.stance(n) for n in range(n_feet)]
    return np.array([g for g in hands + feet for _ in range(3)], dtype=float)


def external_generalized_force(
    terms: DynamicsTerms,
    flags: ContactFlags,
    u: ArrayLike,
    f_swing: Sequence[ArrayLike] = (),
    f_hand: Sequence[ArrayLike] = (),
    f_ext: ArrayLike = (0.0, 0.0, 0.0),
) -> FloatArray:
    """Generalized force of contact wrenches, limb PD forces and the object load.

    ``u`` holds the ground wrenches acting on the robot. ``f_ext`` is the
    support force the hands give the object, so the robot feels ``-f_ext``.
    Limb PD forces are produced by the joints: they enter only the actuated
    rows, with the sign that adds ``J_pd^T F_pd`` to the joint torques.
    """

    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != terms.J_c.shape[0]:
        raise ValueError(f"u must have {terms.J_c.shape[0]} entries, got {u.size}")
    tau_f = terms.J_c.T @ (_contact_gate(flags, terms.n_feet) * u)
    tau_f -= float(flags.e) * (terms.J_e.T @ as_vec3(f_ext))

    hands = list(f_hand) or [np.zeros(3)] * terms.n_hands
    feet = list(f_swing) or [np.zeros(3)] * terms.n_feet
    if len(hands) != terms.n_hands or len(feet) != terms.n_feet:
        raise ValueError("one PD force per hand and per foot is required")
    if terms.J_pd.shape[0]:
        f_pd = np.concatenate([as_vec3(f) for f in hands + feet])
        joint_torque = terms.J_pd.T @ (_pd_gate(flags, terms.n_hands, terms.n_feet) * f_pd)
        tau_f[terms.actuated] -= joint_torque[terms.actuated]
    return tau_f


def desired_acceleration(
    x_des: ArrayLike,
    xd_des: ArrayLike,
    x: ArrayLike,
    xd: ArrayLike,
    kp: ArrayLike = DEFAULT_KP_WBC,
    kd: ArrayLike = DEFAULT_KD_WBC,
) -> FloatArray:
    """PD acceleration over ``[p_c; theta]``."""

    position_error = np.asarray(x_des, dtype=float) - np.asarray(x, dtype=float)
    velocity_error = np.asarray(xd_des, dtype=float) - np.asarray(xd, dtype=float)
    return np.asarray(kp, dtype=float) * position_error + np.asarray(kd, dtype=float) * velocity_error


# ---------------------------------------------------------------------------
# Prioritized task accelerations
# ---------------------------------------------------------------------------


def _row_space(J: FloatArray, rcond: float) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """SVD of ``J`` truncated to singular values above ``rcond * s_max``."""

    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0], s[:0], Vt[:0]
    keep = s > rcond * s[0]
    return U[:, keep], s[keep], Vt[keep]


def damped_pinv(J: FloatArray, damping: float = DEFAULT_DAMPING, rcond: float = DEFAULT_RCOND) -> FloatArray:
    """``sigma / (sigma^2 + damping^2)`` per kept singular value."""

    U, s, Vt = _row_space(np.atleast_2d(np.asarray(J, dtype=float)), rcond)
    return (Vt.T * (s / (s**2 + damping**2))) @ U.T


def prioritized_accelerations(
    tasks: Sequence[Task], nq: int, damping: float = DEFAULT_DAMPING, rcond: float = DEFAULT_RCOND
) -> FloatArray:
    """Recursive null-space resolution; earlier tasks have priority.

    Each update is projected through the null space left by the earlier tasks,
    so a conflicting later task cannot move their residuals.
    """

    qdd = np.zeros(nq)
    N = np.eye(nq)
    for task in tasks:
        if task.J.shape[0] == 0:
            continue
        JN = task.J @ N
        U, s, Vt = _row_space(JN, rcond)
        if s.size == 0:
            continue
        pinv = (Vt.T * (s / (s**2 + damping**2))) @ U.T
        qdd = qdd + N @ (pinv @ (task.acceleration - task.bias - task.J @ qdd))
        N = N - Vt.T @ Vt
        N = 0.5 * (N + N.T)
    return qdd


def base_task(terms: DynamicsTerms, base_acc: ArrayLike) -> Task:
    selector = np.zeros((3, terms.nq))
    selector[:, 3:6] = np.eye(3)
    return Task(
        name="base",
        J=np.vstack([terms.J_com, selector]),
        acceleration=np.asarray(base_acc, dtype=float),
        bias=np.concatenate([terms.com_bias, np.zeros(3)]),
    )


def ik_projection(
    terms: DynamicsTerms,
    base_acc: ArrayLike,
    flags: ContactFlags,
    swing_acc: Sequence[Optional[ArrayLike]] = (),
    hand_acc: Sequence[Optional[ArrayLike]] = (),
    posture_acc: Optional[ArrayLike] = None,
    damping: float = DEFAULT_DAMPING,
) -> FloatArray:
    """Commanded joint accelerations: stance contacts, then base, then limbs, then posture."""

    tasks: List[Task] = []
    nf = terms.n_feet
    if terms.floating_base and nf:
        rows = []
        for n in range(nf):
            if flags.stance(n):
                rows.extend([3 * n, 3 * n + 1, 3 * n + 2, 3 * nf + 2 * n, 3 * nf + 2 * n + 1])
        if rows:
            tasks.append(Task("contact", terms.J_c[rows], np.zeros(len(rows)), terms.contact_bias[rows]))
    if terms.floating_base:
        tasks.append(base_task(terms, base_acc))

    limb_rows, limb_acc = [], []
    nh = terms.n_hands
    for n in range(nf):
        acc = swing_acc[n] if n < len(swing_acc) else None
        if acc is not None and not flags.stance(n):
            limb_rows.extend(range(3 * (nh + n), 3 * (nh + n) + 3))
            limb_acc.append(as_vec3(acc))
    for m in range(nh):
        acc = hand_acc[m] if m < len(hand_acc) else None
        if acc is not None and flags.hand(m):
            limb_rows.extend(range(3 * m, 3 * m + 3))
            limb_acc.append(as_vec3(acc))
    if limb_rows:
        tasks.append(Task("limbs", terms.J_pd[limb_rows], np.concatenate(limb_acc), terms.pd_bias[limb_rows]))

    if posture_acc is not None:
        selector = np.zeros((terms.actuated.size, terms.nq))
        selector[np.arange(terms.actuated.size), terms.actuated] = 1.0
        tasks.append(Task("posture", selector, np.asarray(posture_acc, float), np.zeros(terms.actuated.size)))
    return prioritized_accelerations(tasks, terms.nq, damping)


# ---------------------------------------------------------------------------
# Torque QP
# ---------------------------------------------------------------------------


def _u_bounds(flags: ContactFlags, n_feet: int, f_max: float) -> Tuple[FloatArray, FloatArray]:
    lower, upper = [], []
    moment_lower, moment_upper = [], []
    for n in range(n_feet):
        if flags.stance(n):
            lower.extend([-f_max, -f_max, 0.0])
            upper.extend([f_max, f_max, f_max])
            moment_lower.extend([-f_max, -f_max])
            moment_upper.extend([f_max, f_max])
        else:
            lower.extend([0.0] * 3)
            upper.extend([0.0] * 3)
            moment_lower.extend([0.0] * 2)
            moment_upper.extend([0.0] * 2)
    return np.array(lower + moment_lower), np.array(upper + moment_upper)


def _wrench_rows(
    flags: ContactFlags, n_feet: int, mu: float, toe: float, heel: float
) -> Tuple[List[FloatArray], List[float], List[str]]:
    """Rows ``a @ (u + du) <= 0`` for the friction pyramid and the line-foot support."""

    nu = 5 * n_feet
    rows, labels = [], []
    for n in range(n_feet):
        if not flags.stance(n):
            continue
        fx, fy, fz = 3 * n, 3 * n + 1, 3 * n + 2
        my, mz = 3 * n_feet + 2 * n, 3 * n_feet + 2 * n + 1
        for axis in (fx, fy):
            for sign in (1.0, -1.0):
                row = np.zeros(nu)
                row[axis] = sign
                row[fz] = -mu
                rows.append(row)
                labels.append("friction")
        # -toe * Fz <= My <= heel * Fz
        row = np.zeros(nu)
        row[my], row[fz] = 1.0, -heel
        rows.append(row)
        labels.append("cop")
        row = np.zeros(nu)
        row[my], row[fz] = -1.0, -toe
        rows.append(row)
        labels.append("cop")
        yaw_arm = mu * 0.5 * (toe + heel)
        for sign in (1.0, -1.0):
            row = np.zeros(nu)
            row[mz], row[fz] = sign, -yaw_arm
            rows.append(row)
            labels.append("cop")
    return rows, [0.0] * len(rows), labels


def solve_wbc(
    terms: DynamicsTerms,
    qdd_cmd: ArrayLike,
    u_mpc: ArrayLike,
    tau_f: ArrayLike,
    flags: ContactFlags,
    cfg: WbcConfig,
    limits: ActuatorLimits,
    foot_toe: float = 0.09,
    foot_heel: float = 0.05,
) -> WbcSolution:
    """Relax ``(qdd_cmd, u)`` so the floating-base rows hold and torques stay in bounds.

    ``tau_f`` is the external generalized force evaluated at ``u_mpc``; the
    relaxation ``du`` enters it through the stance-gated contact Jacobian.
    """

    qdd_cmd = np.asarray(qdd_cmd, dtype=float)
    u = np.asarray(u_mpc, dtype=float)
    tau_f = np.asarray(tau_f, dtype=float)
    nq = terms.nq
    nu = terms.J_c.shape[0]
    nf = terms.n_feet
    Jc_gated = (_contact_gate(flags, nf)[:, None] * terms.J_c) if nu else np.zeros((0, nq))

    # generalized force residual as an affine function of z = [dqdd; du]
    A_full = np.hstack([terms.M, -Jc_gated.T])
    b_full = terms.M @ qdd_cmd + terms.h - tau_f

    base_rows = np.arange(BASE_DOF) if terms.floating_base else np.zeros(0, dtype=int)
    act = terms.actuated

    h_diag = np.full(nq, cfg.h_joint)
    if terms.floating_base:
        h_diag[:BASE_DOF] = cfg.h_base
    k_diag = np.asarray(cfg.k_weights[:nu], dtype=float)
    if k_diag.size != nu:
        raise ValueError(f"k_weights needs {nu} entries")
    P = 2.0 * np.diag(np.concatenate([h_diag, k_diag]))
    P += 1e-9 * np.eye(nq + nu)

    A_in: List[FloatArray] = []
    lb: List[float] = []
    ub: List[float] = []
    labels: List[str] = []

    if nu:
        u_lo, u_hi = _u_bounds(flags, nf, cfg.f_max)
        for i in range(nu):
            row = np.zeros(nq + nu)
            row[nq + i] = 1.0
            A_in.append(row)
            lb.append(u_lo[i] - u[i])
            ub.append(u_hi[i] - u[i])
            labels.append("u_bounds")
        wrench_rows, _, wrench_labels = _wrench_rows(flags, nf, cfg.mu, foot_toe, foot_heel)
        for row, label in zip(wrench_rows, wrench_labels):
            full = np.zeros(nq + nu)
            full[nq:] = row
            A_in.append(full)
            lb.append(-np.inf)
            ub.append(-float(row @ u))
            labels.append(label)

    tau_offset = b_full[act]
    for j, index in enumerate(act):
        A_in.append(A_full[index])
        lb.append(-limits.tau_max[j] - tau_offset[j])
        ub.append(limits.tau_max[j] - tau_offset[j])
        labels.append("torque_limits")

    A_eq = A_full[base_rows] if base_rows.size else None
    b_eq = -b_full[base_rows] if base_rows.size else None
    problem = QpProblem(
        P=P,
        q=np.zeros(nq + nu),
        A_eq=A_eq,
        b_eq=b_eq,
        A_in=np.array(A_in).reshape(-1, nq + nu),
        lb=np.array(lb),
        ub=np.array(ub),
        labels_eq=["dynamics"] * base_rows.size if base_rows.size else None,
        labels_in=labels,
    )
    result = solve(problem, tol=cfg.qp_tol, max_iter=cfg.qp_max_iter)
    if result.status is QpStatus.INFEASIBLE:
        classes = result.certificate.classes if result.certificate is not None else ()
        raise WbcInfeasibleError(classes, result)
    z = result.z
    residual = A_full @ z + b_full
    tau = limits.clip(residual[act])
    return WbcSolution(
        delta_qdd=z[:nq],
        delta_u=z[nq:],
        tau=tau,
        status=result.status,
        base_residual=residual[base_rows],
        qp=result,
    )


class WholeBodyController:
    """One high-rate tick from measured joint state to actuator torques."""

    def __init__(
        self,
        tree: KinematicTree,
        limits: ActuatorLimits,
        cfg: Optional[WbcConfig] = None,
        foot_toe: float = 0.09,
        foot_heel: float = 0.05,
    ) -> None:
        self.tree = tree
        self.limits = limits
        self.cfg = cfg or WbcConfig()
        self.foot_toe = foot_toe
        self.foot_heel = foot_heel
        self.nominal_q = tree.nominal_q if tree.nominal_q is not None else np.zeros(tree.nq)

    def step(self, state: JointState, u: ArrayLike, flags: ContactFlags, targets: TaskTargets) -> WbcCommand:
        started = time.perf_counter()
        cfg = self.cfg
        object_link = self.tree.hands[0].link if self.tree.hands else None
        terms = compute_dynamics(
            self.tree,
            state.q,
            state.qd,
            object_link=object_link,
            object_point=targets.object_point,
        )

        x = np.concatenate([terms.com, state.q[3:6]])
        xd = np.concatenate([terms.com_velocity, state.qd[3:6]])
        base_acc = desired_acceleration(targets.base_position, targets.base_velocity, x, xd, cfg.kp_wbc, cfg.kd_wbc)

        f_swing, swing_acc = [], []
        for n in range(terms.n_feet):
            target = targets.feet[n] if n < len(targets.feet) else None
            if target is None:
                p_des, v_des, a_des = terms.foot_positions[n], np.zeros(3), None
            else:
                p_des, v_des, a_des = target
            f_swing.append(
                swing_force(p_des, v_des, terms.foot_positions[n], terms.foot_velocities[n], cfg.swing_gains)
            )
            swing_acc.append(a_des)

        f_hand, hand_acc = [], []
        for m in range(terms.n_hands):
            target = targets.hands[m] if m < len(targets.hands) else None
            if target is None:
                p_des, v_des = terms.hand_positions[m], np.zeros(3)
            else:
                p_des, v_des = target
            f_hand.append(hand_force(p_des, v_des, terms.hand_positions[m], terms.hand_velocities[m], cfg.hand_gains))
            hand_acc.append(np.zeros(3))

        act = terms.actuated
        posture = cfg.posture_kp * (self.nominal_q[act] - state.q[act]) - cfg.posture_kd * state.qd[act]
        qdd_cmd = ik_projection(terms, base_acc, flags, swing_acc, hand_acc, posture, cfg.damping)
        tau_f = external_generalized_force(terms, flags, u, f_swing, f_hand, targets.f_ext)
        solution = solve_wbc(
            terms, qdd_cmd, u, tau_f, flags, cfg, self.limits, foot_toe=self.foot_toe, foot_heel=self.foot_heel
        )
        return WbcCommand(
            tau=solution.tau,
            qdd_cmd=qdd_cmd,
            delta_u_norm=float(np.linalg.norm(solution.delta_u)),
            status=solution.status.value,
            solve_time=time.perf_counter() - started,
            f_pd=np.concatenate(f_hand + f_swing) if (f_hand or f_swing) else np.zeros(0),
        )
