"""Foothold heuristic, swing trajectories and Cartesian PD forces for feet and hands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, NonNegativeFloat

from dynamics.spatial_math import FloatArray, as_vec3, rot_z

DEFAULT_APEX = 0.08
DEFAULT_K_GAIN = 0.03


class PdGains(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kp: Tuple[NonNegativeFloat, NonNegativeFloat, NonNegativeFloat] = (500.0, 500.0, 500.0)
    kd: Tuple[NonNegativeFloat, NonNegativeFloat, NonNegativeFloat] = (30.0, 30.0, 30.0)


@dataclass(frozen=True, eq=False)
class SwingPlan:
    start: FloatArray
    target: FloatArray
    apex: float = DEFAULT_APEX
    duration: float = 0.2

    def __post_init__(self) -> None:
        if self.apex < 0.0:
            raise ValueError("apex height must be non-negative")
        if self.duration <= 0.0:
            raise ValueError("swing duration must be positive")


def foot_placement(
    p_c: ArrayLike,
    p_c_dot: ArrayLike,
    p_c_dot_des: ArrayLike,
    gait_period: float,
    k_gain: float = DEFAULT_K_GAIN,
    *,
    hip_offset: ArrayLike = (0.0, 0.0, 0.0),
    yaw: float = 0.0,
    ground_height: float = 0.0,
) -> FloatArray:
    """Capture-style foothold below the hip; z is taken from the terrain."""

    if gait_period <= 0.0:
        raise ValueError("gait period must be positive")
    p_c, v, v_des = as_vec3(p_c), as_vec3(p_c_dot), as_vec3(p_c_dot_des)
    target = p_c + v * gait_period / 2.0 + k_gain * (v - v_des)
    offset = rot_z(yaw) @ as_vec3(hip_offset)
    target[:2] += offset[:2]
    target[2] = ground_height
    return target


def _pd(p_des: ArrayLike, v_des: ArrayLike, p: ArrayLike, v: ArrayLike, gains: PdGains) -> FloatArray:
    return np.asarray(gains.kp) * (as_vec3(p_des) - as_vec3(p)) + np.asarray(gains.kd) * (as_vec3(v_des) - as_vec3(v))


def swing_force(p_f_des: ArrayLike, v_f_des: ArrayLike, p_f: ArrayLike, v_f: ArrayLike, gains: PdGains) -> FloatArray:
    return _pd(p_f_des, v_f_des, p_f, v_f, gains)


def hand_force(p_h_des: ArrayLike, v_h_des: ArrayLike, p_h: ArrayLike, v_h: ArrayLike, gains: PdGains) -> FloatArray:
    return _pd(p_h_des, v_h_des, p_h, v_h, gains)


def _quintic(s: float) -> Tuple[float, float, float]:
    """Smoothstep 10s^3 - 15s^4 + 6s^5 with its first two derivatives."""

    return (
        s**3 * (10.0 - 15.0 * s + 6.0 * s**2),
        30.0 * s**2 * (1.0 - s) ** 2,
        60.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
    )


def swing_trajectory(plan: SwingPlan, phase: float) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """Desired foot position, velocity and acceleration at ``phase`` of the swing."""

    if not 0.0 <= phase <= 1.0:
        raise ValueError("swing phase must lie in [0, 1]")
    start, target = as_vec3(plan.start), as_vec3(plan.target)
    T = plan.duration
    s, ds, dds = _quintic(phase)
    delta = target - start
    position = start + s * delta
    velocity = ds * delta / T
    acceleration = dds * delta / T**2

    bump = np.sin(np.pi * phase) ** 2
    dbump = np.pi * np.sin(2.0 * np.pi * phase)
    ddbump = 2.0 * np.pi**2 * np.cos(2.0 * np.pi * phase)
    position[2] += plan.apex * bump
    velocity[2] += plan.apex * dbump / T
    acceleration[2] += plan.apex * ddbump / T**2
    return position, velocity, acceleration
