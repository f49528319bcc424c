"""Small 3-D kinematics kernel: skew operators, Euler angles and matrix exponentials.

Euler angles are ordered ``(roll, pitch, yaw)`` and compose as
``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``. With that composition the world-frame
angular velocity is ``omega = R_b @ theta_dot`` so the rates are recovered with
``R_b^-1 @ omega``.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm

from dynamics.errors import SingularityError

DEFAULT_PITCH_GUARD = 0.087  # rad, about 5 degrees

FloatArray = NDArray[np.float64]


def as_vec3(value: ArrayLike, name: str = "vector") -> FloatArray:
    vec = np.asarray(value, dtype=float).reshape(-1)
    if vec.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} contains non-finite entries")
    return vec


def skew(v: ArrayLike) -> FloatArray:
    """Return the matrix ``S`` such that ``S @ w == np.cross(v, w)``."""

    x, y, z = as_vec3(v)
    return np.array(
        [
            [0.0, -z, y],
            [z, 0.0, -x],
            [-y, x, 0.0],
        ]
    )


def rot_x(angle: float) -> FloatArray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> FloatArray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> FloatArray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_matrix(theta: ArrayLike) -> FloatArray:
    """Body-to-world rotation for Euler angles ``(roll, pitch, yaw)``."""

    roll, pitch, yaw = as_vec3(theta, "euler angles")
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def _check_pitch(pitch: float, guard: float) -> None:
    if abs(pitch) >= math.pi / 2.0 - guard:
        raise SingularityError(pitch, guard)


def rotation_to_euler(rotation: ArrayLike, guard: float = DEFAULT_PITCH_GUARD) -> FloatArray:
    """Inverse of :func:`rotation_matrix` on the principal branch."""

    R = np.asarray(rotation, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    pitch = -math.asin(float(np.clip(R[2, 0], -1.0, 1.0)))
    _check_pitch(pitch, guard)
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


def euler_rate_matrix(theta: ArrayLike, guard: float = DEFAULT_PITCH_GUARD) -> FloatArray:
    """Return ``R_b`` mapping Euler-angle rates to world angular velocity."""

    _, pitch, yaw = as_vec3(theta, "euler angles")
    _check_pitch(pitch, guard)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cp * cy, -sy, 0.0],
            [cp * sy, cy, 0.0],
            [-sp, 0.0, 1.0],
        ]
    )


def euler_rates(theta: ArrayLike, omega: ArrayLike, guard: float = DEFAULT_PITCH_GUARD) -> FloatArray:
    """Euler-angle rates for a world-frame angular velocity."""

    return np.linalg.solve(euler_rate_matrix(theta, guard), as_vec3(omega, "angular velocity"))


def matrix_exponential(A: ArrayLike, t: float = 1.0) -> FloatArray:
    """``exp(A * t)`` by scaling and squaring with a Pade approximant."""

    mat = np.asarray(A, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matrix_exponential expects a square matrix, got shape {mat.shape}")
    return expm(mat * float(t))
