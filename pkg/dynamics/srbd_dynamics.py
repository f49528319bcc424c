"""Single-rigid-body state space with contact-schedule gating.

State ``x`` (15): ``[theta(3), p_c(3), omega(3), p_c_dot(3), g(3)]`` where the last
block is the constant gravity vector carried as a dummy state.
Input ``U`` (13): ``[F1(3), F2(3), M1(2), M2(2), F_ext(3)]`` with foot moments
``M_n = [M_ny, M_nz]`` lifted to 3-D through ``L``.

``F_ext`` is the support force the hands apply to the carried object
(``(0, 0, m_o g)`` when the object is held); the trunk feels its reaction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Literal, Tuple

import numpy as np
from numpy.typing import ArrayLike

from dynamics.spatial_math import (
    DEFAULT_PITCH_GUARD,
    FloatArray,
    as_vec3,
    euler_rate_matrix,
    euler_rates,
    matrix_exponential,
    rotation_matrix,
    skew,
)

NX = 15
NU = 13
GRAVITY_VECTOR = np.array([0.0, 0.0, -9.81])
MOMENT_SELECTION = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

# state slices
THETA = slice(0, 3)
POS = slice(3, 6)
OMEGA = slice(6, 9)
VEL = slice(9, 12)
GRAV = slice(12, 15)

# input slices
F1 = slice(0, 3)
F2 = slice(3, 6)
M1 = slice(6, 8)
M2 = slice(8, 10)
FEXT = slice(10, 13)


class Discretization(str, Enum):
    ZOH = "zoh"
    EULER = "euler"


@dataclass(frozen=True)
class RigidBodyState:
    theta: FloatArray
    p_c: FloatArray
    omega: FloatArray
    p_c_dot: FloatArray

    def augmented(self) -> FloatArray:
        return np.concatenate([self.theta, self.p_c, self.omega, self.p_c_dot, GRAVITY_VECTOR])

    @classmethod
    def from_vector(cls, x: ArrayLike) -> "RigidBodyState":
        data = np.asarray(x, dtype=float)
        return cls(theta=data[THETA].copy(), p_c=data[POS].copy(), omega=data[OMEGA].copy(), p_c_dot=data[VEL].copy())


@dataclass(frozen=True)
class ContinuousSS:
    A: FloatArray
    B: FloatArray


def world_inertia(I_body: ArrayLike, theta: ArrayLike) -> FloatArray:
    R = rotation_matrix(theta)
    I_world = R @ np.asarray(I_body, dtype=float) @ R.T
    return 0.5 * (I_world + I_world.T)


def build_A(theta: ArrayLike, guard: float = DEFAULT_PITCH_GUARD) -> FloatArray:
    R_b = euler_rate_matrix(theta, guard)
    A = np.zeros((NX, NX))
    A[THETA, OMEGA] = np.linalg.solve(R_b, np.eye(3))
    A[POS, VEL] = np.eye(3)
    A[VEL, GRAV] = np.eye(3)
    return A


def build_B(
    r1: ArrayLike,
    r2: ArrayLike,
    r_e: ArrayLike,
    I_G: ArrayLike,
    m_ub: float,
    flags,
) -> FloatArray:
    """Input matrix with stance/object gating. ``flags`` needs ``c1``, ``c2`` and ``e``."""

    I_G = np.asarray(I_G, dtype=float)
    if abs(np.linalg.det(I_G)) < 1e-12:
        raise np.linalg.LinAlgError("world inertia I_G is singular")
    s1, s2, se = float(flags.c1), float(flags.c2), float(flags.e)
    torque_map = np.zeros((3, NU))
    torque_map[:, F1] = s1 * skew(r1)
    torque_map[:, F2] = s2 * skew(r2)
    torque_map[:, M1] = s1 * MOMENT_SELECTION
    torque_map[:, M2] = s2 * MOMENT_SELECTION
    torque_map[:, FEXT] = -se * skew(r_e)

    B = np.zeros((NX, NU))
    B[OMEGA, :] = np.linalg.solve(I_G, torque_map)
    B[VEL, F1] = s1 * np.eye(3) / m_ub
    B[VEL, F2] = s2 * np.eye(3) / m_ub
    B[VEL, FEXT] = -se * np.eye(3) / m_ub
    # keep gated columns exactly zero after the solve
    for gate, block in ((s1, F1), (s2, F2), (s1, M1), (s2, M2), (se, FEXT)):
        if gate == 0.0:
            B[:, block] = 0.0
    return B


def build_continuous(
    theta: ArrayLike,
    r1: ArrayLike,
    r2: ArrayLike,
    r_e: ArrayLike,
    I_body: ArrayLike,
    m_ub: float,
    flags,
    guard: float = DEFAULT_PITCH_GUARD,
) -> ContinuousSS:
    I_G = world_inertia(I_body, theta)
    return ContinuousSS(A=build_A(theta, guard), B=build_B(r1, r2, r_e, I_G, m_ub, flags))


def discretize(
    ss: ContinuousSS,
    dt: float,
    method: Discretization | Literal["zoh", "euler"] = Discretization.ZOH,
) -> Tuple[FloatArray, FloatArray]:
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    method = Discretization(method)
    n, m = ss.B.shape
    if method is Discretization.EULER:
        return np.eye(n) + ss.A * dt, ss.B * dt
    augmented = np.zeros((n + m, n + m))
    augmented[:n, :n] = ss.A
    augmented[:n, n:] = ss.B
    phi = matrix_exponential(augmented, dt)
    return phi[:n, :n], phi[:n, n:]


def srbd_derivative(
    x: ArrayLike,
    U: ArrayLike,
    I_body: ArrayLike,
    m_ub: float,
    feet: Tuple[ArrayLike, ArrayLike],
    object_point: ArrayLike,
    flags,
    guard: float = DEFAULT_PITCH_GUARD,
) -> FloatArray:
    """Nonlinear rigid-body dynamics with world-fixed footholds and a body-fixed object point.

    ``feet`` are world foothold positions; ``object_point`` is the object CoM
    offset from the body CoM expressed in body axes.
    """

    x = np.asarray(x, dtype=float)
    U = np.asarray(U, dtype=float)
    theta, p_c, omega, p_dot = x[THETA], x[POS], x[OMEGA], x[VEL]
    R = rotation_matrix(theta)
    I_G = R @ np.asarray(I_body, dtype=float) @ R.T
    s1, s2, se = float(flags.c1), float(flags.c2), float(flags.e)

    r1 = as_vec3(feet[0]) - p_c
    r2 = as_vec3(feet[1]) - p_c
    r_e = R @ as_vec3(object_point)
    f1, f2, f_ext = U[F1], U[F2], U[FEXT]
    force = s1 * f1 + s2 * f2 - se * f_ext
    torque = (
        s1 * (np.cross(r1, f1) + MOMENT_SELECTION @ U[M1])
        + s2 * (np.cross(r2, f2) + MOMENT_SELECTION @ U[M2])
        - se * np.cross(r_e, f_ext)
    )
    omega_dot = np.linalg.solve(I_G, torque - np.cross(omega, I_G @ omega))

    dx = np.zeros(NX)
    dx[THETA] = euler_rates(theta, omega, guard)
    dx[POS] = p_dot
    dx[OMEGA] = omega_dot
    dx[VEL] = force / m_ub + x[GRAV]
    return dx


def srbd_step_oracle(
    x: ArrayLike,
    U: ArrayLike,
    I_body: ArrayLike,
    m_ub: float,
    feet: Tuple[ArrayLike, ArrayLike],
    object_point: ArrayLike,
    flags,
    dt: float,
    substeps: int = 10,
    guard: float = DEFAULT_PITCH_GUARD,
) -> FloatArray:
    """RK4 integration of the nonlinear dynamics over ``dt`` with a held input."""

    state = np.asarray(x, dtype=float).copy()
    h = dt / substeps

    def f(s: FloatArray) -> FloatArray:
        return srbd_derivative(s, U, I_body, m_ub, feet, object_point, flags, guard)

    for _ in range(substeps):
        k1 = f(state)
        k2 = f(state + 0.5 * h * k1)
        k3 = f(state + 0.5 * h * k2)
        k4 = f(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return state


def static_equilibrium_input(
    r1: ArrayLike,
    r2: ArrayLike,
    m_ub: float,
    m_o: float = 0.0,
    r_e: ArrayLike = (0.0, 0.0, 0.0),
    flags=None,
) -> FloatArray:
    """Vertical forces (and pitch/yaw moments) that balance weight in double stance.

    Forces are split so the roll moment cancels using only vertical forces; the
    remaining pitch/yaw moment goes to the foot moments.
    """

    r1, r2, r_e = as_vec3(r1), as_vec3(r2), as_vec3(r_e)
    carried = m_o if flags is None or flags.e else 0.0
    weight = (m_ub + carried) * 9.81
    f_ext = np.array([0.0, 0.0, carried * 9.81])
    # roll balance: r1y f1 + r2y f2 = r_ey * m_o g, f1 + f2 = weight
    dy = r1[1] - r2[1]
    if abs(dy) < 1e-9:
        f1z = f2z = 0.5 * weight
    else:
        f1z = (r_e[1] * f_ext[2] - r2[1] * weight) / dy
        f2z = weight - f1z
    f1_vec = np.array([0.0, 0.0, f1z])
    f2_vec = np.array([0.0, 0.0, f2z])
    residual = np.cross(r1, f1_vec) + np.cross(r2, f2_vec) - np.cross(r_e, f_ext)
    U = np.zeros(NU)
    U[F1] = f1_vec
    U[F2] = f2_vec
    U[M1] = -0.5 * residual[1:]
    U[M2] = -0.5 * residual[1:]
    U[FEXT] = f_ext
    return U
