from __future__ import annotations

import numpy as np
import pytest

from control.swing_hand_pd import (
    DEFAULT_K_GAIN,
    PdGains,
    SwingPlan,
    foot_placement,
    hand_force,
    swing_force,
    swing_trajectory,
)


def test_foot_placement_matches_capture_heuristic():
    p_c = np.array([1.0, 0.2, 0.55])
    v = np.array([0.4, 0.0, 0.0])
    v_des = np.array([0.5, 0.0, 0.0])
    target = foot_placement(p_c, v, v_des, 0.6, hip_offset=(0.0, 0.09, 0.0), ground_height=0.02)
    expected_x = 1.0 + 0.4 * 0.3 + DEFAULT_K_GAIN * (0.4 - 0.5)
    assert target == pytest.approx([expected_x, 0.29, 0.02])


def test_foot_placement_rotates_hip_offset_with_yaw():
    target = foot_placement(np.zeros(3), np.zeros(3), np.zeros(3), 0.6, hip_offset=(0.0, 0.1, 0.0), yaw=np.pi / 2)
    assert target[:2] == pytest.approx([-0.1, 0.0])
    with pytest.raises(ValueError):
        foot_placement(np.zeros(3), np.zeros(3), np.zeros(3), 0.0)


def test_swing_trajectory_endpoints_and_apex():
    plan = SwingPlan(start=np.array([0.0, 0.1, 0.0]), target=np.array([0.2, 0.1, 0.0]), apex=0.08, duration=0.3)
    p0, v0, _ = swing_trajectory(plan, 0.0)
    p1, v1, _ = swing_trajectory(plan, 1.0)
    mid, _, _ = swing_trajectory(plan, 0.5)
    assert p0 == pytest.approx(plan.start)
    assert p1 == pytest.approx(plan.target)
    assert v0 == pytest.approx(np.zeros(3), abs=1e-12)
    assert v1 == pytest.approx(np.zeros(3), abs=1e-12)
    assert mid == pytest.approx([0.1, 0.1, 0.08])


def test_swing_velocity_is_derivative_of_position():
    plan = SwingPlan(start=np.zeros(3), target=np.array([0.25, -0.05, 0.03]), duration=0.3)
    eps = 1e-6
    _, v, a = swing_trajectory(plan, 0.3)
    ahead, v_ahead, _ = swing_trajectory(plan, 0.3 + eps)
    behind, v_behind, _ = swing_trajectory(plan, 0.3 - eps)
    # phase is normalized by the swing duration
    assert v == pytest.approx((ahead - behind) / (2 * eps * plan.duration), abs=1e-5)
    assert a == pytest.approx((v_ahead - v_behind) / (2 * eps * plan.duration), abs=1e-3)


@pytest.mark.parametrize("phase", [-0.01, 1.01])
def test_swing_phase_outside_unit_interval(phase):
    plan = SwingPlan(start=np.zeros(3), target=np.zeros(3))
    with pytest.raises(ValueError):
        swing_trajectory(plan, phase)


def test_swing_plan_validation():
    with pytest.raises(ValueError):
        SwingPlan(start=np.zeros(3), target=np.zeros(3), apex=-0.1)
    with pytest.raises(ValueError):
        SwingPlan(start=np.zeros(3), target=np.zeros(3), duration=0.0)


def test_pd_forces():
    gains = PdGains(kp=(100.0, 200.0, 300.0), kd=(10.0, 10.0, 10.0))
    force = hand_force([0.1, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], gains)
    assert force == pytest.approx([10.0, 0.0, -10.0])
    assert swing_force([0, 0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0], gains) == pytest.approx(np.zeros(3))
    with pytest.raises(ValueError):
        PdGains(kp=(-1.0, 0.0, 0.0))
